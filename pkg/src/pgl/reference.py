"""Analytic intermediate states of the two gate designs, written out term by term.

These are transcriptions of the hand-derived states the circuits are built
around, used as targets for checkpoint diffs. They are deliberately kept as
literal term lists rather than computed from the optics, so that a wiring
error shows up as a per-ket mismatch.

``expected_state(gate, checkpoint, coeffs, outcome)`` returns the normalized
analytic state; ``expected_probability`` the probability quoted alongside it.
"""

from __future__ import annotations

import math
from typing import Sequence

from .fock import BasisKet, FockState, ModeId, Pol

R2 = math.sqrt(2.0)


def _k(*modes) -> BasisKet:
    """Ket from (label, pol) pairs; repeated modes raise the occupation."""
    return BasisKet((ModeId(lab, Pol[p]), 1) for lab, p in modes)


def _state(terms) -> FockState:
    acc: dict[BasisKet, complex] = {}
    for ket, amp in terms:
        acc[ket] = acc.get(ket, 0j) + amp
    return FockState(acc)


def _times_qubit(terms, label, a, b):
    return [(k.merge(_k((label, "H"))), c * a) for k, c in terms] + [(k.merge(_k((label, "V"))), c * b) for k, c in terms]


# ---------------------------------------------------------------- CPF


def cpf_states(coeffs) -> dict[str, FockState]:
    (a1, b1), (a2, b2) = coeffs
    r = 1 / R2
    s = {}

    def t(terms):
        return _times_qubit(terms, "t_in", a2, b2)

    s["input"] = _state(
        _times_qubit(_times_qubit([(_k(("c_in", p)), c) for p, c in (("H", a1), ("V", b1))], "t_in", a2, b2), "a", r, r)
    )
    s["after-PBS1"] = _state(
        t(
            [
                (_k(("1", "H"), ("2", "H")), r * a1),
                (_k(("1", "H"), ("1", "V")), r * b1),
                (_k(("2", "H"), ("2", "V")), r * a1),
                (_k(("1", "V"), ("2", "V")), r * b1),
            ]
        )
    )
    s["after-PBS1-postselect"] = _state(t([(_k(("1", "H"), ("2", "H")), a1), (_k(("1", "V"), ("2", "V")), b1)]))

    def block(sign3):
        # sign3 = +1 for the |H>_3 block, -1 for |V>_3
        return [
            (_k(("1", "H"), ("4", "H")), a1 * a2),
            (_k(("1", "H"), ("4", "V")), sign3 * a1 * b2),
            (_k(("1", "V"), ("4", "H")), b1 * a2),
            (_k(("1", "V"), ("4", "V")), -sign3 * b1 * b2),
        ]

    h3 = [(k.merge(_k(("3", "H"))), c) for k, c in block(+1)]
    v3 = [(k.merge(_k(("3", "V"))), c) for k, c in block(-1)]
    # (H3 + V3)(H3 - V3) acting on vacuum leaves H3^2 - V3^2, i.e. sqrt2 (|2_H> - |2_V>)
    doubles = []
    for p1, c in (("H", a1 * a2), ("V", -b1 * a2)):
        doubles.append((_k(("1", p1), ("3", "H"), ("3", "H")), c / (2 * R2) * R2))
        doubles.append((_k(("1", p1), ("3", "V"), ("3", "V")), -c / (2 * R2) * R2))
    pairs = [
        (_k(("1", "H"), ("4", "H"), ("4", "V")), a1 * b2 / R2),
        (_k(("1", "V"), ("4", "H"), ("4", "V")), b1 * b2 / R2),
    ]
    s["after-HWP2"] = _state([(k, c / 2) for k, c in h3 + v3] + doubles + pairs)
    s["after-34-postselect"] = _state([(k, c / R2) for k, c in h3 + v3])
    s["after-D3:H"] = _state(block(+1))
    s["after-D3:V"] = _state(block(-1))
    return s


CPF_PROBABILITY = {
    "input": 1.0,
    "after-PBS1": 1.0,
    "after-PBS1-postselect": 0.5,
    "after-HWP2": 0.5,
    "after-34-postselect": 0.25,
    "after-D3:H": 0.125,
    "after-D3:V": 0.125,
}


# ---------------------------------------------------------------- Toffoli


def _gammas(coeffs):
    (a1, b1), (a2, b2), (a3, b3) = coeffs
    return [None, a1 * a2 * a3, a1 * a2 * b3, a1 * b2 * a3, a1 * b2 * b3, b1 * a2 * a3, b1 * a2 * b3, b1 * b2 * a3, b1 * b2 * b3]


_FLIP = {"H": "V", "V": "H"}
# (gamma index, sign, pol_1, pol_9or10, pol_11) for the |V>_12 block with the photon in mode 9
_ROWS_9 = [
    (1, 1, "H", "H", "H"), (2, 1, "H", "H", "V"), (3, 1, "H", "V", "H"), (4, 1, "H", "V", "V"),
    (5, 1, "V", "H", "H"), (6, 1, "V", "H", "V"), (7, 1, "V", "V", "V"), (8, 1, "V", "V", "H"),
]
_ROWS_10 = [
    (1, 1, "H", "V", "H"), (2, 1, "H", "V", "V"), (3, 1, "H", "H", "H"), (4, 1, "H", "H", "V"),
    (5, 1, "V", "V", "H"), (6, 1, "V", "V", "V"), (7, -1, "V", "H", "V"), (8, -1, "V", "H", "H"),
]


def toffoli_states(coeffs, with_bs: bool = True) -> dict[str, FockState]:
    (a1, b1), (a2, b2), (a3, b3) = coeffs
    five = "5'" if with_bs else "5"
    g = _gammas(coeffs)
    s = {}

    def anc_t(terms, a2_norm=1.0):
        return _times_qubit(_times_qubit(terms, "a2", a2_norm, a2_norm), "t_in", a3, b3)

    s["after-PBS1-postselect"] = _state(
        _times_qubit(anc_t([(_k(("1", "H"), ("2", "H")), a1), (_k(("1", "V"), ("2", "V")), b1)], 1 / R2), "c2_in", a2, b2)
    )
    single = [
        (_k(("1", "H"), ("4", "H"), ("6", "H")), a1 * a2), (_k(("1", "V"), ("4", "H"), ("6", "H")), b1 * a2),
        (_k(("1", "H"), ("4", "H"), ("6", "V")), a1 * a2), (_k(("1", "V"), ("4", "H"), ("6", "V")), b1 * a2),
        (_k(("1", "H"), ("4", "H"), ("5", "H")), a1 * a2), (_k(("1", "V"), ("4", "H"), ("5", "H")), -b1 * a2),
        (_k(("1", "H"), ("4", "H"), ("5", "V")), -a1 * a2), (_k(("1", "V"), ("4", "H"), ("5", "V")), b1 * a2),
    ]
    double = [
        (_k(("1", "H"), ("5", "V"), ("6", "H")), a1 * b2), (_k(("1", "V"), ("5", "H"), ("6", "H")), b1 * b2),
        (_k(("1", "H"), ("5", "H"), ("6", "V")), a1 * b2), (_k(("1", "V"), ("5", "V"), ("6", "V")), b1 * b2),
    ]
    s["after-PBS3-postselect"] = _state(anc_t([(k, c / (2 * R2)) for k, c in single] + [(k, c / 2) for k, c in double]))
    d6 = [
        (_k(("1", "H"), ("4", "H")), a1 * a2), (_k(("1", "H"), (five, "V")), a1 * b2),
        (_k(("1", "V"), ("4", "H")), b1 * a2), (_k(("1", "V"), (five, "H")), b1 * b2),
    ]
    s["after-D6"] = _state(anc_t([(k, c / R2) for k, c in d6], 1.0))
    s["after-PBS5-postselect"] = _state(
        _times_qubit(
            [
                (_k(("1", "H"), ("4", "H"), ("8", "V")), a1 * a2), (_k(("1", "H"), ("7", "V"), ("8", "V")), a1 * b2),
                (_k(("1", "V"), ("4", "H"), ("8", "V")), b1 * a2), (_k(("1", "V"), ("7", "H"), ("8", "H")), b1 * b2),
            ],
            "t_in", a3, b3,
        )
    )
    terms = []
    for rows, mid in ((_ROWS_9, "9"), (_ROWS_10, "10")):
        for d12 in ("V", "H"):
            for i, sign, p1, pm, p11 in rows:
                p11 = p11 if d12 == "V" else _FLIP[p11]
                terms.append((_k(("1", p1), (mid, pm), ("11", p11), ("12", d12)), sign * g[i] / 2))
    s["after-PBS6-block"] = _state(terms)
    s["output"] = _state([(_k(("1", p1), ("9", p9), ("11", p11)), g[i]) for i, _, p1, p9, p11 in _ROWS_9])
    return s


def toffoli_probability(checkpoint: str, alpha2: float) -> tuple[float, str]:
    """Quoted probability for a Toffoli checkpoint and how it is aggregated.

    The second item is ``"total"`` (summed over every earlier detector
    outcome) or the name of the detector whose single outcome the value is
    quoted for (summed over the other detectors).
    """
    x = alpha2 * alpha2
    step2 = 0.5 * (1 + x) / 2
    table = {
        "after-PBS1-postselect": (0.5, "total"),
        "after-PBS3-postselect": (step2, "total"),
        "after-D6": (step2 / 4, "D6"),
        "after-PBS5-postselect": (step2 * 0.5 * 0.5, "total"),
        "after-PBS6-block": (step2 * 0.5 * 0.5 * 0.5, "total"),
        "output": (step2 * 0.5 * 0.5 * 0.5 * 0.25, "D12"),
    }
    return table[checkpoint]


def expected_state(gate: str, checkpoint: str, coeffs: Sequence, outcome: str | None = None, with_bs: bool = True):
    gate = gate.upper()
    if gate == "CPF":
        states = cpf_states(coeffs)
        if checkpoint == "after-D3":
            # with feed-forward both outcomes land on the H-outcome state
            return states["after-D3:H"]
        return states[checkpoint]
    states = toffoli_states(coeffs, with_bs=with_bs)
    return states[checkpoint]
