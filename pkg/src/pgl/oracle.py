"""Permanent cross-check of the creation-operator evolution on random unitaries."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .fock import BasisKet, FockState, ModeId, ModeUnitary, Pol, apply_mode_unitary, permanent_amplitude


def occupations(modes: int, photons: int):
    """All ways to put ``photons`` bosons into ``modes`` modes, in lexicographic order."""
    for bars in itertools.combinations(range(photons + modes - 1), modes - 1):
        edges = (-1,) + bars + (photons + modes - 1,)
        yield tuple(edges[i + 1] - edges[i] - 1 for i in range(modes))


def _ket(ids, occ) -> BasisKet:
    return BasisKet((m, n) for m, n in zip(ids, occ) if n)


@dataclass
class OracleReport:
    trials: int
    modes: int
    photons: int
    comparisons: int
    max_deviation: float


def oracle_check(modes: int, photons: int, trials: int, seed: int = 0) -> OracleReport:
    """Compare every output amplitude of random Haar unitaries against the permanent formula."""
    if modes < 1 or photons < 0 or trials < 1:
        raise ValueError("need modes >= 1, photons >= 0 and trials >= 1")
    rng = np.random.default_rng(seed)
    ids = [ModeId(f"m{i}", Pol.H) for i in range(modes)]
    sector = list(occupations(modes, photons))
    worst = 0.0
    count = 0
    for _ in range(trials):
        mat = unitary_group.rvs(modes, random_state=rng) if modes > 1 else np.exp(2j * np.pi * rng.random()).reshape(1, 1)
        u = ModeUnitary(ids, mat)
        inp = _ket(ids, sector[rng.integers(len(sector))])
        out = apply_mode_unitary(FockState({inp: 1.0}), u)
        for occ in sector:
            k = _ket(ids, occ)
            worst = max(worst, float(abs(out[k] - permanent_amplitude(u, inp, k))))
            count += 1
    return OracleReport(trials, modes, photons, count, worst)
