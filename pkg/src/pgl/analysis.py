"""Gate metrics, alpha_2 sweeps and closed-form curve averages.

The post-selected map of a circuit is linear in the logical input for every
success branch, so each branch is a (non-unitary) matrix ``M_b`` on the
logical space. ``kraus_map`` recovers those matrices by running the engine on
the computational basis; sweeps then evaluate ``P = sum_b |M_b x|^2`` and the
branch-weighted fidelity directly, which is exact and avoids thousands of
full Fock-space runs.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import reference
from .engine import BranchOutcome, Circuit, run, success_branches
from .gates import (
    GateOptions,
    basis_label,
    build_toffoli_circuit,
    decode_output,
    encode_on,
    ideal_gate,
    product_vector,
)

DEFAULT_SEED = 20240611
DEFAULT_DRAWS = 20
CSV_HEADER = ("alpha2", "p_sim", "p_paper", "f_sim", "f_paper", "options", "seed")


class UndefinedFidelityError(ValueError):
    """Fidelity requested for an input the gate never accepts."""


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("PGL_THREADS", "1")))
    except ValueError:
        return 1


def logical_vector(x, n: int) -> np.ndarray:
    """Accept a logical vector or a sequence of per-qubit (alpha, beta) pairs."""
    arr = np.asarray(x, dtype=complex)
    if arr.shape == (2**n,):
        return arr
    if arr.shape == (n, 2):
        return product_vector([tuple(p) for p in arr])
    raise ValueError(f"expected {n} (alpha, beta) pairs or a length-{2**n} vector")


@dataclass
class GateMetrics:
    probability: float
    fidelity: float
    branches: list[BranchOutcome]
    per_branch: list[tuple[tuple, float, float]] = field(default_factory=list)


def evaluate(circuit: Circuit, x, ideal: np.ndarray | None = None, apply_feed_forward: bool = True) -> GateMetrics:
    """Run one logical input and score every success branch against the ideal gate."""
    n = len(circuit.inputs)
    vec = logical_vector(x, n)
    ideal = ideal_gate(circuit.name) if ideal is None else np.asarray(ideal, dtype=complex)
    target = ideal @ vec
    target = target / np.linalg.norm(target)
    branches = run(circuit, encode_on(vec, circuit.inputs, circuit.ancillas), apply_feed_forward=apply_feed_forward)
    rows = []
    for b in success_branches(branches):
        out = decode_output(b.state, circuit.output_labels)
        rows.append((b.key, b.probability, float(abs(np.vdot(target, out)))))
    p = float(sum(r[1] for r in rows))
    f = float(sum(r[1] * r[2] for r in rows) / p) if p > 0 else float("nan")
    return GateMetrics(p, f, branches, rows)


def success_probability(circuit: Circuit, x) -> float:
    return evaluate(circuit, x).probability


def gate_fidelity(circuit: Circuit, x, ideal: np.ndarray | None = None) -> float:
    m = evaluate(circuit, x, ideal)
    if m.probability <= 0:
        raise UndefinedFidelityError("input is never accepted; fidelity undefined")
    return m.fidelity


def kraus_map(circuit: Circuit, apply_feed_forward: bool = True) -> dict[tuple, np.ndarray]:
    """Success-branch matrices, keyed by (attempt, detector record)."""
    n = len(circuit.inputs)
    dim = 2**n

    def column(i):
        e = np.zeros(dim, dtype=complex)
        e[i] = 1.0
        out = {}
        for b in success_branches(run(circuit, encode_on(e, circuit.inputs, circuit.ancillas), apply_feed_forward)):
            if b.key in out:
                raise RuntimeError(f"duplicate success branch {b.key}")
            out[b.key] = math.sqrt(b.probability) * decode_output(b.state, circuit.output_labels)
        return out

    with ThreadPoolExecutor(max_workers=n_threads()) as pool:
        cols = list(pool.map(column, range(dim)))
    keys = sorted({k for c in cols for k in c}, key=repr)
    return {k: np.stack([c.get(k, np.zeros(dim, dtype=complex)) for c in cols], axis=1) for k in keys}


def kraus_metrics(kraus: dict[tuple, np.ndarray], vec: np.ndarray, ideal: np.ndarray) -> tuple[float, float]:
    target = ideal @ vec
    target = target / np.linalg.norm(target)
    p = 0.0
    pf = 0.0
    for m in kraus.values():
        out = m @ vec
        pb = float(np.vdot(out, out).real)
        if pb > 0:
            p += pb
            pf += math.sqrt(pb) * abs(np.vdot(target, out))
    if p <= 0:
        raise UndefinedFidelityError("input is never accepted; fidelity undefined")
    return p, pf / p


@dataclass
class TruthTable:
    labels: list[str]
    probability: np.ndarray  # success probability per basis input
    population: np.ndarray  # [input, output] accepted population, normalized per input
    fidelity: np.ndarray  # per basis input, against the ideal gate

    def format(self) -> str:
        w = max(len(s) for s in self.labels)
        lines = ["in".ljust(w) + "  P_success   " + "  ".join(s.rjust(6) for s in self.labels) + "  fidelity"]
        for i, lab in enumerate(self.labels):
            pops = "  ".join(f"{v:6.3f}" for v in self.population[i])
            lines.append(f"{lab.ljust(w)}  {self.probability[i]:.9f}  {pops}  {self.fidelity[i]:.9f}")
        return "\n".join(lines)


def truth_table(circuit: Circuit, kind: str | None = None) -> TruthTable:
    kind = (kind or circuit.name).upper()
    n = len(circuit.inputs)
    dim = 2**n
    ideal = ideal_gate(kind)
    kraus = kraus_map(circuit)
    probs = np.zeros(dim)
    pops = np.zeros((dim, dim))
    fids = np.zeros(dim)
    for i in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[i] = 1.0
        for m in kraus.values():
            out = m @ e
            probs[i] += float(np.vdot(out, out).real)
            pops[i] += np.abs(out) ** 2
        if probs[i] > 0:
            pops[i] /= probs[i]
            fids[i] = kraus_metrics(kraus, e, ideal)[1]
    return TruthTable([basis_label(i, n) for i in range(dim)], probs, pops, fids)


# -------------------------------------------------------------- closed forms


def p_quoted_no_recycle(a2: float) -> float:
    return (1 + a2 * a2) / 64


def p_quoted_recycle(a2: float) -> float:
    x = a2 * a2
    return (1 + x) * (2 - x) / 64


def f_quoted_no_bs(a2: float) -> float:
    x = a2 * a2
    return 1 - x + x / math.sqrt(2 - x)


def f_quoted_with_bs(a2: float) -> float:
    return 1.0


def quoted_curves(opts: GateOptions) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """Quoted (probability, fidelity) curves for a configuration.

    Without the BS the quoted probability coincides with the recycling curve.
    """
    if not opts.with_bs:
        return p_quoted_recycle, f_quoted_no_bs
    return (p_quoted_recycle if opts.recycle else p_quoted_no_recycle), f_quoted_with_bs


def average_over_alpha2(curve: Callable[[float], float]) -> float:
    """(1/2) * integral of ``curve`` over alpha_2 in [-1, 1]."""
    probe = [curve(float(a)) for a in np.linspace(-1.0, 1.0, 33)]
    if not np.all(np.isfinite(probe)):
        raise ValueError("curve has non-finite samples on [-1, 1]")

    def f(a):
        v = curve(a)
        if not math.isfinite(v):
            raise ValueError(f"curve is not finite at alpha2={a}")
        return v

    val, _ = integrate.quad(f, -1.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return 0.5 * val


def fit_shape(xs: Sequence[float], ys: Sequence[float], shape: Callable[[float], float]) -> tuple[float, float]:
    """Least-squares constant c for ys ~ c * shape(xs); returns (c, max |residual|)."""
    s = np.array([shape(x) for x in xs])
    y = np.asarray(ys, dtype=float)
    c = float(s @ y / (s @ s))
    return c, float(np.max(np.abs(y - c * s)))


# -------------------------------------------------------------- sweeps


def random_qubits(seed: int, draws: int) -> list[tuple[tuple[complex, complex], tuple[complex, complex]]]:
    """Seeded Haar-random (alpha1, beta1), (alpha3, beta3) pairs used at every grid point."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(draws):
        pair = []
        for _ in range(2):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            pair.append((complex(v[0]), complex(v[1])))
        out.append(tuple(pair))
    return out


def parse_grid(spec: str) -> np.ndarray:
    """``"a:b:step"`` -> inclusive, strictly increasing grid."""
    from .numbers import parse_real

    try:
        a, b, step = (parse_real(p) for p in spec.split(":"))
    except ValueError as exc:
        raise ValueError(f"grid must look like a:b:step, got {spec!r}") from exc
    if step <= 0 or a > b:
        raise ValueError(f"grid needs start <= end and step > 0, got {spec!r}")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(n), 12)


@dataclass
class SweepTable:
    options: GateOptions
    seed: int
    draws: int
    alpha2: np.ndarray
    p_sim: np.ndarray
    p_paper: np.ndarray
    f_sim: np.ndarray
    f_paper: np.ndarray

    def rows(self):
        for i in range(len(self.alpha2)):
            yield (float(self.alpha2[i]), float(self.p_sim[i]), float(self.p_paper[i]),
                   float(self.f_sim[i]), float(self.f_paper[i]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        tag = self.options.tag()
        for row in self.rows():
            w.writerow([f"{v:.12g}" for v in row] + [tag, self.seed])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "options": self.options.tag(),
            "seed": self.seed,
            "draws": self.draws,
            "columns": list(CSV_HEADER[:5]),
            "rows": [[float(f"{v:.12g}") for v in row] for row in self.rows()],
        }


def sweep_alpha2(
    grid: Sequence[float],
    opts: GateOptions = GateOptions(),
    seed: int = DEFAULT_SEED,
    draws: int = DEFAULT_DRAWS,
    kraus: dict | None = None,
) -> SweepTable:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(np.abs(grid) > 1.0 + 1e-12):
        raise ValueError("alpha2 grid must lie within [-1, 1]")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("alpha2 grid must be strictly increasing")
    if kraus is None:
        kraus = kraus_map(build_toffoli_circuit(opts), apply_feed_forward=opts.apply_feed_forward)
    ideal = ideal_gate("TOFFOLI")
    samples = random_qubits(seed, draws)
    p_curve, f_curve = quoted_curves(opts)

    def point(a2):
        a2 = float(np.clip(a2, -1.0, 1.0))
        b2 = math.sqrt(max(0.0, 1.0 - a2 * a2))
        pf = [kraus_metrics(kraus, product_vector([q1, (a2, b2), q3]), ideal) for q1, q3 in samples]
        return float(np.mean([x[0] for x in pf])), float(np.mean([x[1] for x in pf]))

    with ThreadPoolExecutor(max_workers=n_threads()) as pool:
        results = list(pool.map(point, grid))
    p_sim = np.array([r[0] for r in results])
    f_sim = np.array([r[1] for r in results])
    return SweepTable(
        opts, seed, draws, grid, p_sim,
        np.array([p_curve(a) for a in grid]), f_sim, np.array([f_curve(a) for a in grid]),
    )


# -------------------------------------------------------------- diagnostics


@dataclass
class CheckpointRow:
    label: str
    p_sim: float
    p_quoted: float
    aggregation: str
    deviation: float

    @property
    def ratio(self) -> float:
        return self.p_sim / self.p_quoted if self.p_quoted else float("nan")


def checkpoint_report(opts: GateOptions, coeffs) -> list[CheckpointRow]:
    """Per-checkpoint comparison of simulated and quoted Toffoli quantities.

    ``deviation`` is the largest amplitude difference between the simulated
    snapshot (branch D6=H, D12=V) and the analytic state; ``p_sim`` is
    aggregated the same way as the quoted probability (see
    ``reference.toffoli_probability``).
    """
    circuit = build_toffoli_circuit(opts)
    branches = run(circuit, encode_on(logical_vector(coeffs, 3), circuit.inputs, circuit.ancillas), opts.apply_feed_forward)
    refs = reference.toffoli_states(coeffs, with_bs=opts.with_bs)
    a2 = float(abs(coeffs[1][0]))
    rows = []
    for label in circuit.checkpoint_labels:
        if label == "input":
            continue
        seen = {}
        for b in branches:
            for e in b.trace:
                if e.label == label and e.attempt == 1:
                    seen[tuple(sorted(e.record.items()))] = e
        quoted, agg = reference.toffoli_probability(label, a2)
        if agg == "total":
            p = sum(e.probability for e in seen.values())
        else:
            p = sum(e.probability for k, e in seen.items() if dict(k).get(agg) == (1, 0))
        rep = [e for k, e in seen.items() if dict(k).get("D6", (1, 0)) == (1, 0) and dict(k).get("D12", (0, 1)) == (0, 1)]
        dev = rep[0].state.max_deviation(refs[label]) if rep else float("nan")
        rows.append(CheckpointRow(label, p, quoted, agg, dev))
    return rows


def format_checkpoint_report(rows: list[CheckpointRow], atol: float = 1e-9) -> str:
    lines = [f"{'checkpoint':24s} {'p_sim':>14s} {'p_quoted':>14s} {'ratio':>10s} {'agg':>6s} {'max|d amp|':>12s}"]
    first = None
    for r in rows:
        flag = ""
        if r.deviation > atol:
            flag = " <- state differs"
            first = first or r.label
        lines.append(
            f"{r.label:24s} {r.p_sim:14.10f} {r.p_quoted:14.10f} {r.ratio:10.6f} {r.aggregation:>6s} {r.deviation:12.3e}{flag}"
        )
    lines.append(f"first failing checkpoint: {first or 'none'}")
    return "\n".join(lines)
