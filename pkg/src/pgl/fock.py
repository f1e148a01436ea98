"""Fixed-photon-number bosonic states over (spatial label, polarization) modes.

A basis ket is a canonical occupation map; a state is a sparse map from kets to
complex amplitudes. Single-particle unitaries act on states by substituting
each creation operator a_j^+ with sum_i U[i, j] a_i^+ and re-collecting the
resulting monomials with their sqrt(n!) normalization factors.
"""

from __future__ import annotations

import itertools
import math
from enum import IntEnum
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

PRUNE = 1e-14
UNITARY_TOL = 1e-12


class FockError(Exception):
    """Base class for state-algebra errors."""


class RegistryError(FockError, KeyError):
    """A mode references a spatial label that is not registered."""


class ValidationError(FockError, ValueError):
    """Malformed operator or state (e.g. a non-unitary matrix)."""


class SectorError(FockError, ValueError):
    """Photon-number mismatch between two kets or states."""


class ZeroNormError(FockError, ZeroDivisionError):
    """Attempt to normalize the zero vector."""


class Pol(IntEnum):
    H = 0
    V = 1

    @classmethod
    def parse(cls, value: "Pol | str | int") -> "Pol":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(value)


class ModeId(NamedTuple):
    """A single-particle mode. Tuple ordering gives (label, H before V)."""

    label: str
    pol: Pol

    def __str__(self) -> str:
        return f"{self.pol.name}_{self.label}"


def mode(label: str, pol: "Pol | str") -> ModeId:
    return ModeId(str(label), Pol.parse(pol))


class BasisKet:
    """Canonical occupation-number ket; zero counts are dropped and modes sorted."""

    __slots__ = ("occ", "_hash", "_n")

    def __init__(self, occupations: Mapping[ModeId, int] | Iterable[tuple[ModeId, int]] = ()):
        items = occupations.items() if isinstance(occupations, Mapping) else occupations
        merged: dict[ModeId, int] = {}
        for m, n in items:
            if n < 0:
                raise ValidationError(f"negative occupation {n} for {m}")
            if n:
                m = ModeId(m[0], Pol.parse(m[1]))
                merged[m] = merged.get(m, 0) + int(n)
        self.occ: tuple[tuple[ModeId, int], ...] = tuple(sorted(merged.items()))
        self._hash = hash(self.occ)
        self._n = sum(merged.values())

    @classmethod
    def _trusted(cls, occ: Iterable[tuple[ModeId, int]]) -> "BasisKet":
        """Skip validation; ``occ`` must hold distinct ModeIds with positive counts."""
        k = cls.__new__(cls)
        k.occ = tuple(sorted(occ))
        k._hash = hash(k.occ)
        k._n = sum(n for _, n in k.occ)
        return k

    @classmethod
    def of(cls, *modes: ModeId | tuple[str, str]) -> "BasisKet":
        """Ket with one photon per listed mode (repeats add up)."""
        return cls((mode(*m), 1) for m in modes)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BasisKet) and self.occ == other.occ

    def __lt__(self, other: "BasisKet") -> bool:
        return self.occ < other.occ

    def __iter__(self) -> Iterator[tuple[ModeId, int]]:
        return iter(self.occ)

    def __repr__(self) -> str:
        if not self.occ:
            return "|vac>"
        return "|" + " ".join(str(m) if n == 1 else f"{m}^{n}" for m, n in self.occ) + ">"

    def as_dict(self) -> dict[ModeId, int]:
        return dict(self.occ)

    @property
    def photon_number(self) -> int:
        return self._n

    def count(self, m: ModeId) -> int:
        for k, n in self.occ:
            if k == m:
                return n
        return 0

    def spatial_count(self, label: str) -> int:
        return sum(n for m, n in self.occ if m.label == label)

    def labels(self) -> set[str]:
        return {m.label for m, _ in self.occ}

    def without(self, labels: Iterable[str]) -> "BasisKet":
        drop = set(labels)
        return BasisKet._trusted((m, n) for m, n in self.occ if m.label not in drop)

    def restricted(self, labels: Iterable[str]) -> "BasisKet":
        keep = set(labels)
        return BasisKet((m, n) for m, n in self.occ if m.label in keep)

    def relabel(self, mapping: Mapping[str, str]) -> "BasisKet":
        return BasisKet((ModeId(mapping.get(m.label, m.label), m.pol), n) for m, n in self.occ)

    def merge(self, other: "BasisKet") -> "BasisKet":
        return BasisKet(list(self.occ) + list(other.occ))


class FockState:
    """Sparse superposition of basis kets sharing one photon number.

    Instances are treated as immutable; every operation returns a new state.
    """

    __slots__ = ("terms", "photon_number", "prune")

    def __init__(
        self,
        terms: Mapping[BasisKet, complex] | Iterable[tuple[BasisKet, complex]] = (),
        photon_number: int | None = None,
        prune: float = PRUNE,
    ):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[BasisKet, complex] = {}
        for ket, amp in items:
            acc[ket] = acc.get(ket, 0j) + complex(amp)
        kept = {k: a for k, a in acc.items() if abs(a) > prune}
        numbers = {k.photon_number for k in kept}
        if len(numbers) > 1:
            raise SectorError(f"state mixes photon numbers {sorted(numbers)}")
        if numbers:
            n = numbers.pop()
            if photon_number is not None and photon_number != n:
                raise SectorError(f"declared photon number {photon_number}, kets carry {n}")
            photon_number = n
        self.terms: dict[BasisKet, complex] = dict(sorted(kept.items()))
        self.photon_number: int = 0 if photon_number is None else photon_number
        self.prune = prune

    # construction helpers

    @classmethod
    def vacuum(cls) -> "FockState":
        return cls({BasisKet(): 1.0})

    @classmethod
    def qubit(cls, label: str, alpha: complex, beta: complex) -> "FockState":
        """alpha |H>_label + beta |V>_label."""
        return cls(
            {BasisKet.of((label, "H")): alpha, BasisKet.of((label, "V")): beta},
            photon_number=1,
        )

    @classmethod
    def ket(cls, *modes, amplitude: complex = 1.0) -> "FockState":
        k = BasisKet.of(*modes)
        return cls({k: amplitude}, photon_number=k.photon_number)

    def tensor(self, other: "FockState") -> "FockState":
        """Product with a state on disjoint modes."""
        out: dict[BasisKet, complex] = {}
        for k1, a1 in self.terms.items():
            modes1 = {m for m, _ in k1}
            for k2, a2 in other.terms.items():
                if modes1 & {m for m, _ in k2}:
                    raise ValidationError("tensor product requires disjoint modes")
                k = k1.merge(k2)
                out[k] = out.get(k, 0j) + a1 * a2
        return FockState(out, photon_number=self.photon_number + other.photon_number, prune=self.prune)

    # algebra

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __getitem__(self, ket: BasisKet) -> complex:
        return self.terms.get(ket, 0j)

    def amplitude(self, *modes) -> complex:
        return self.terms.get(BasisKet.of(*modes), 0j)

    def _check_sector(self, other: "FockState") -> None:
        if self.terms and other.terms and self.photon_number != other.photon_number:
            raise SectorError(f"cannot add {self.photon_number}- and {other.photon_number}-photon states")

    def __add__(self, other: "FockState") -> "FockState":
        self._check_sector(other)
        out = dict(self.terms)
        for k, a in other.terms.items():
            out[k] = out.get(k, 0j) + a
        n = self.photon_number if self.terms else other.photon_number
        return FockState(out, photon_number=n, prune=self.prune)

    def __sub__(self, other: "FockState") -> "FockState":
        return self + (-1) * other

    def __mul__(self, c: complex) -> "FockState":
        return FockState(
            {k: a * c for k, a in self.terms.items()}, photon_number=self.photon_number, prune=self.prune
        )

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "FockState":
        return self * (1.0 / c)

    def __neg__(self) -> "FockState":
        return self * -1

    def __repr__(self) -> str:
        if not self.terms:
            return "FockState(0)"
        parts = [f"({a.real:+.6g}{a.imag:+.6g}j){k!r}" for k, a in self.terms.items()]
        return "FockState(" + " ".join(parts) + ")"

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def is_zero(self) -> bool:
        return not self.terms

    def modes(self) -> set[ModeId]:
        return {m for k in self.terms for m, _ in k}

    def labels(self) -> set[str]:
        return {m.label for m in self.modes()}

    def relabel(self, mapping: Mapping[str, str]) -> "FockState":
        return FockState(
            {k.relabel(mapping): a for k, a in self.terms.items()},
            photon_number=self.photon_number,
            prune=self.prune,
        )

    def filter(self, keep) -> "FockState":
        """Keep only kets for which ``keep(ket)`` is true (an unnormalized projection)."""
        return FockState(
            {k: a for k, a in self.terms.items() if keep(k)}, photon_number=self.photon_number, prune=self.prune
        )

    def max_deviation(self, other: "FockState") -> float:
        keys = set(self.terms) | set(other.terms)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def allclose(self, other: "FockState", atol: float = 1e-12) -> bool:
        return self.max_deviation(other) <= atol

    def diff(self, other: "FockState", atol: float = 1e-12) -> list[tuple[BasisKet, complex, complex]]:
        """Kets whose amplitudes differ by more than ``atol``: (ket, self amp, other amp)."""
        keys = sorted(set(self.terms) | set(other.terms))
        return [(k, self[k], other[k]) for k in keys if abs(self[k] - other[k]) > atol]


class ModeUnitary:
    """Unitary on an ordered list of single-particle modes.

    ``matrix[i, j]`` is the amplitude for a photon entering ``modes[j]`` to
    leave in ``modes[i]``.
    """

    __slots__ = ("modes", "matrix", "name")

    def __init__(self, modes: Sequence[ModeId], matrix, name: str = "", tol: float = UNITARY_TOL):
        modes = tuple(ModeId(m[0], Pol.parse(m[1])) for m in modes)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (len(modes), len(modes)):
            raise ValidationError(f"matrix shape {matrix.shape} does not match {len(modes)} modes")
        if len(set(modes)) != len(modes):
            raise ValidationError("duplicate modes in ModeUnitary")
        dev = unitarity_error(matrix)
        if dev >= tol:
            raise ValidationError(f"matrix is not unitary (max |U^+U - I| = {dev:.3g})")
        self.modes = modes
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.name = name

    def __repr__(self) -> str:
        return f"ModeUnitary({self.name or '?'}, {len(self.modes)} modes)"

    @property
    def labels(self) -> set[str]:
        return {m.label for m in self.modes}

    def then(self, other: "ModeUnitary") -> "ModeUnitary":
        """Apply self, then other (same mode list) -> other.matrix @ self.matrix."""
        if other.modes != self.modes:
            raise ValidationError("composition requires identical mode lists")
        return ModeUnitary(self.modes, other.matrix @ self.matrix, name=f"{self.name};{other.name}")

    def embed(self, modes: Sequence[ModeId]) -> np.ndarray:
        """Matrix on a larger ordered mode list, identity outside ``self.modes``."""
        index = {m: i for i, m in enumerate(modes)}
        out = np.eye(len(modes), dtype=complex)
        idx = [index[m] for m in self.modes]
        out[np.ix_(idx, idx)] = self.matrix
        return out


def unitarity_error(matrix) -> float:
    m = np.asarray(matrix, dtype=complex)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))) if m.size else 0.0


def _check_registry(u: ModeUnitary, registry: Iterable[str] | None) -> None:
    if registry is None:
        return
    known = set(registry)
    missing = sorted(u.labels - known)
    if missing:
        raise RegistryError(f"unregistered spatial labels {missing}")


def apply_mode_unitary(state: FockState, u: ModeUnitary, registry: Iterable[str] | None = None) -> FockState:
    """Evolve ``state`` under the multi-photon lift of ``u``."""
    _check_registry(u, registry)
    index = {m: i for i, m in enumerate(u.modes)}
    mat = u.matrix
    d = len(u.modes)
    cols = [[(i, mat[i, j]) for i in range(d) if mat[i, j] != 0] for j in range(d)]
    out: dict[BasisKet, complex] = {}
    cache: dict[tuple[int, ...], dict[tuple[int, ...], complex]] = {}

    for ket, amp in state.terms.items():
        inside = [0] * d
        outside = []
        for m, n in ket:
            j = index.get(m)
            if j is None:
                outside.append((m, n))
            else:
                inside[j] = n
        key = tuple(inside)
        expansion = cache.get(key)
        if expansion is None:
            expansion = _expand(key, cols, d)
            cache[key] = expansion
        for occ, c in expansion.items():
            new = BasisKet._trusted(outside + [(u.modes[i], n) for i, n in enumerate(occ) if n])
            out[new] = out.get(new, 0j) + amp * c
    return FockState(out, photon_number=state.photon_number, prune=state.prune)


def _expand(inside: tuple[int, ...], cols, d: int) -> dict[tuple[int, ...], complex]:
    """Output-occupation amplitudes for one input occupation pattern."""
    poly: dict[tuple[int, ...], complex] = {(0,) * d: 1.0 + 0j}
    for j, n in enumerate(inside):
        for _ in range(n):
            nxt: dict[tuple[int, ...], complex] = {}
            for occ, c in poly.items():
                for i, uij in cols[j]:
                    o = list(occ)
                    o[i] += 1
                    o = tuple(o)
                    nxt[o] = nxt.get(o, 0j) + c * uij
            poly = nxt
    norm_in = math.prod(math.factorial(n) for n in inside)
    return {
        occ: c * math.sqrt(math.prod(math.factorial(n) for n in occ) / norm_in)
        for occ, c in poly.items()
    }


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>; zero across different photon-number sectors."""
    if a.photon_number != b.photon_number:
        return 0j
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for k in small.terms:
        if k in large.terms:
            total += a.terms[k].conjugate() * b.terms[k]
    return total


def normalize(state: FockState) -> tuple[FockState, float]:
    """Return (unit-norm state, original squared norm)."""
    p = state.norm2()
    if p <= 0.0 or state.is_zero():
        raise ZeroNormError("cannot normalize the zero state")
    return state * (1.0 / math.sqrt(p)), p


def permanent(a) -> complex:
    """Permanent of a square matrix by Ryser's formula with Gray-code-free subset sums."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValidationError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for r in range(1, n + 1):
        sign = (-1) ** r
        for cols in itertools.combinations(range(n), r):
            total += sign * np.prod(a[:, cols].sum(axis=1))
    return (-1) ** n * total


def permanent_amplitude(u: ModeUnitary, inp: BasisKet, out: BasisKet) -> complex:
    """<out| U |inp> from the permanent of the occupation-repeated submatrix."""
    if inp.photon_number != out.photon_number:
        raise SectorError(f"input has {inp.photon_number} photons, output {out.photon_number}")
    index = {m: i for i, m in enumerate(u.modes)}
    for ket in (inp, out):
        for m, _ in ket:
            if m not in index:
                raise RegistryError(f"mode {m} not covered by the unitary")
    cols = [index[m] for m, n in inp for _ in range(n)]
    rows = [index[m] for m, n in out for _ in range(n)]
    sub = u.matrix[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(n) for _, n in inp) * math.prod(math.factorial(n) for _, n in out)
    return permanent(sub) / math.sqrt(norm)
