"""Post-selected CPF and Toffoli circuits, ideal gates and logical encodings.

Logical encoding is one photon per qubit with H = 0 and V = 1. Basis ordering
of logical vectors is controls first, then target, most significant first.

PBS routings below are written ``{input: (H_out, V_out)}``. They were fixed by
requiring the simulated intermediate states to agree ket-by-ket with the
analytic states the circuits are designed around (see ``pgl.reference``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .elements import BS, HWP, PBS, SIGMA_X, SIGMA_Z
from .engine import Checkpoint, Circuit, Detect, DetectionRule, FeedForwardRule, Reroute
from .fock import BasisKet, FockState, ModeId, Pol, ValidationError

DIAG = 1.0 / math.sqrt(2.0)
NORM_TOL = 1e-12

# CPF wiring
CPF_PBS1 = {"c_in": ("2", "1"), "a": ("1", "2")}
CPF_PBS2 = {"2": ("4", "3"), "t_in": ("3", "4")}

# Toffoli wiring. v2 and v5 are the unused (vacuum) input ports of PBS2 and the BS.
TOF_PBS1 = {"c1_in": ("2", "1"), "a1": ("1", "2")}
TOF_PBS2 = {"c2_in": ("4", "3"), "v2": ("3", "4")}
TOF_PBS3 = {"2": ("6", "5"), "3": ("5", "6")}
TOF_PBS8 = {"4": ("9", "10"), "7": ("10", "9")}
TOF_PBS6 = {"8": ("11", "12"), "t_in": ("12", "11")}


def tof_pbs5(five: str) -> dict:
    return {five: ("8", "7"), "a2": ("7", "8")}


@dataclass(frozen=True)
class GateOptions:
    with_bs: bool = True
    recycle: bool = False
    apply_feed_forward: bool = True

    def __post_init__(self):
        if self.recycle and not self.with_bs:
            raise ValidationError("recycling needs the beam splitter (mode 5'' only exists with it)")

    def tag(self) -> str:
        return f"with_bs={int(self.with_bs)};recycle={int(self.recycle)};feed_forward={int(self.apply_feed_forward)}"


def build_cpf_circuit(apply_feed_forward: bool = True) -> Circuit:
    steps = [
        Checkpoint("input"),
        PBS(CPF_PBS1, "PBS1"),
        Checkpoint("after-PBS1"),
        Checkpoint("after-PBS1-postselect", {"1": 1, "2": 1}),
        HWP(22.5, "2", "HWP1"),
        PBS(CPF_PBS2, "PBS2"),
        HWP(22.5, "3", "HWP2"),
        Checkpoint("after-HWP2", {"1": 1}),
        Checkpoint("after-34-postselect", {"1": 1, "3": 1, "4": 1}),
        Detect("D3"),
        Checkpoint("after-D3", {"1": 1, "4": 1}),
    ]
    ff = (FeedForwardRule("D3", "V", SIGMA_Z("4", "FF-sigma_z")),) if apply_feed_forward else ()
    return Circuit(
        name="CPF",
        registry=frozenset({"c_in", "t_in", "a", "1", "2", "3", "4"}),
        placements=tuple(steps),
        detections=(DetectionRule("D3", "3", "polarization", 1),),
        feed_forwards=ff,
        output_modes=(("1", "c_out"), ("4", "t_out")),
        photons=3,
        inputs=("c_in", "t_in"),
        ancillas=("a",),
    )


def build_toffoli_circuit(opts: GateOptions = GateOptions()) -> Circuit:
    five = "5'" if opts.with_bs else "5"
    steps: list = [
        Checkpoint("input"),
        PBS(TOF_PBS1, "PBS1"),
        Checkpoint("after-PBS1-postselect", {"1": 1, "2": 1}),
        PBS(TOF_PBS2, "PBS2"),
        HWP(22.5, "2"),
        HWP(22.5, "3"),
        PBS(TOF_PBS3, "PBS3"),
        HWP(22.5, "5"),
        HWP(22.5, "6"),
        Checkpoint("after-PBS3-postselect", {"1": 1, "5": (0, 1), "6": (0, 1)}),
    ]
    registry = {"c1_in", "c2_in", "t_in", "a1", "a2", "v2"} | {str(i) for i in range(1, 13)}
    if opts.with_bs:
        registry |= {"v5", "5'", "5''"}
        steps.append(BS("5", "v5", "5'", "5''", "BS"))
        if opts.recycle:
            steps.append(Reroute("5''", "5'"))
    steps += [
        Detect("D6"),
        Checkpoint("after-D6", {"1": 1, "5''": 0} if opts.with_bs else {"1": 1}),
        PBS(tof_pbs5(five), "PBS5"),
        Checkpoint("after-PBS5-postselect", {"1": 1, "8": 1, "5''": 0} if opts.with_bs else {"1": 1, "8": 1}),
        HWP(67.5, "7"),
        HWP(22.5, "4"),
        PBS(TOF_PBS8, "PBS8"),
        HWP(22.5, "8"),
        HWP(22.5, "t_in"),
        PBS(TOF_PBS6, "PBS6"),
        HWP(22.5, "11"),
        HWP(22.5, "12"),
        Checkpoint("after-PBS6-block", {"1": 1, "11": 1, "12": 1, "5''": 0} if opts.with_bs else {"1": 1, "11": 1, "12": 1}),
        Detect("D10"),
        Detect("D12"),
        Checkpoint("output", {"1": 1, "9": 1, "11": 1}),
    ]
    ff = ()
    if opts.apply_feed_forward:
        ff = (
            FeedForwardRule("D6", "V", SIGMA_X(five, "FF-sigma_x-5")),
            FeedForwardRule("D12", "H", SIGMA_X("11", "FF-sigma_x-11")),
        )
    return Circuit(
        name="TOFFOLI",
        registry=frozenset(registry),
        placements=tuple(steps),
        detections=(
            DetectionRule("D6", "6", "polarization", 1),
            DetectionRule("D10", "10", "number", 0),
            DetectionRule("D12", "12", "polarization", 1),
        ),
        feed_forwards=ff,
        output_modes=(("1", "c1_out"), ("9", "c2_out"), ("11", "t_out")),
        photons=5,
        inputs=("c1_in", "c2_in", "t_in"),
        ancillas=("a1", "a2"),
    )


def ideal_gate(kind: str) -> np.ndarray:
    kind = kind.upper()
    if kind == "CPF":
        return np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    if kind == "TOFFOLI":
        u = np.eye(8, dtype=complex)
        u[[6, 7]] = u[[7, 6]]
        return u
    raise ValueError(f"unknown gate {kind!r}")


def n_qubits(kind: str) -> int:
    return {"CPF": 2, "TOFFOLI": 3}[kind.upper()]


def _input_labels(kind: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if kind.upper() == "CPF":
        return ("c_in", "t_in"), ("a",)
    return ("c1_in", "c2_in", "t_in"), ("a1", "a2")


def ancilla_state(kind: str) -> FockState:
    state = FockState.vacuum()
    for lab in _input_labels(kind)[1]:
        state = state.tensor(FockState.qubit(lab, DIAG, DIAG))
    return state


def encode_input(coeffs: Sequence[tuple[complex, complex]], kind: str = "CPF") -> FockState:
    """Product input: one (alpha, beta) pair per gate qubit, plus the diagonal ancillas."""
    gate_labels, _ = _input_labels(kind)
    if len(coeffs) != len(gate_labels):
        raise ValidationError(f"{kind} takes {len(gate_labels)} qubits, got {len(coeffs)}")
    state = FockState.vacuum()
    for lab, (a, b) in zip(gate_labels, coeffs):
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > NORM_TOL:
            raise ValidationError(f"coefficients for {lab} are not normalized")
        state = state.tensor(FockState.qubit(lab, a, b))
    return state.tensor(ancilla_state(kind))


def encode_logical(vector, kind: str = "CPF") -> FockState:
    """Arbitrary (possibly entangled) logical input, tensored with the ancillas."""
    return encode_on(vector, *_input_labels(kind))


def encode_on(vector, gate_labels: Sequence[str], ancillas: Sequence[str] = ()) -> FockState:
    """Logical vector carried by ``gate_labels``, with a diagonal photon in each ancilla label."""
    n = len(gate_labels)
    vec = np.asarray(vector, dtype=complex)
    if vec.shape != (2**n,):
        raise ValidationError(f"logical vector for {n} qubits must have length {2**n}")
    if abs(np.vdot(vec, vec).real - 1.0) > NORM_TOL:
        raise ValidationError("logical vector is not normalized")
    terms = {}
    for idx, amp in enumerate(vec):
        if amp == 0:
            continue
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        terms[BasisKet((ModeId(lab, Pol(b)), 1) for lab, b in zip(gate_labels, bits))] = amp
    state = FockState(terms, photon_number=n)
    for lab in ancillas:
        state = state.tensor(FockState.qubit(lab, DIAG, DIAG))
    return state


def product_vector(coeffs: Sequence[tuple[complex, complex]]) -> np.ndarray:
    vec = np.array([1.0 + 0j])
    for a, b in coeffs:
        vec = np.kron(vec, np.array([a, b], dtype=complex))
    return vec


def decode_output(state: FockState, output_labels: Sequence[str]) -> np.ndarray:
    """Logical vector carried by one photon in each of ``output_labels``."""
    n = len(output_labels)
    vec = np.zeros(2**n, dtype=complex)
    for ket, amp in state:
        if ket.labels() - set(output_labels):
            raise ValidationError(f"ket {ket!r} has photons outside the output modes")
        idx = 0
        for lab in output_labels:
            if ket.spatial_count(lab) != 1:
                raise ValidationError(f"output mode {lab!r} is not singly occupied in {ket!r}")
            idx = 2 * idx + int(ket.count((lab, Pol.V)))
        vec[idx] += amp
    return vec


def basis_label(index: int, n: int) -> str:
    return "".join("V" if (index >> (n - 1 - q)) & 1 else "H" for q in range(n))


def parse_basis_label(text: str) -> np.ndarray:
    text = text.strip().upper()
    if not text or set(text) - {"H", "V", "0", "1"}:
        raise ValueError(f"bad basis label {text!r}")
    idx = 0
    for ch in text:
        idx = 2 * idx + (ch in "V1")
    vec = np.zeros(2 ** len(text), dtype=complex)
    vec[idx] = 1.0
    return vec
