"""Optical elements compiled to ModeUnitary values.

Port conventions:

* HWP / Pauli: acts in place on the two polarization modes of one spatial label.
* PBS: explicit routing ``{input: (H_out, V_out)}`` for two inputs. The unitary
  is the involution that swaps each input mode with its routed output mode, so
  it is only meaningful when the output ports are empty beforehand (which is
  how circuits use it).
* BS: polarization preserving, ``inA -> (outA + outB)/sqrt2`` and
  ``inB -> (outA - outB)/sqrt2``; the input/output blocks are swapped the same
  way as for the PBS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .fock import ModeId, ModeUnitary, Pol, ValidationError

KINDS = ("PBS", "HWP", "BS", "SIGMA_X", "SIGMA_Z")
_SNAP = 1e-15


def _snap(x: float) -> float:
    return 0.0 if abs(x) < _SNAP else x


def hwp(theta: float, port: str) -> ModeUnitary:
    """Half-wave plate at ``theta`` degrees: H -> c H + s V, V -> s H - c V with (c, s) = (cos 2t, sin 2t)."""
    t = math.radians(2.0 * theta)
    c, s = _snap(math.cos(t)), _snap(math.sin(t))
    return ModeUnitary(
        [ModeId(port, Pol.H), ModeId(port, Pol.V)],
        [[c, s], [s, -c]],
        name=f"HWP({theta:g})@{port}",
    )


def pauli(kind: str, port: str) -> ModeUnitary:
    if kind == "SIGMA_X":
        u = hwp(45.0, port)
    elif kind == "SIGMA_Z":
        u = hwp(0.0, port)
    else:
        raise ValidationError(f"unknown Pauli {kind!r}")
    u.name = f"{kind}@{port}"
    return u


def _swap_blocks(pairs: list[tuple[ModeId, ModeId, complex]]) -> ModeUnitary:
    """Involution sending in -> phase * out and out -> conj(phase) * in for every (in, out, phase)."""
    modes: list[ModeId] = []
    for a, b, _ in pairs:
        modes += [a, b]
    index = {m: i for i, m in enumerate(modes)}
    mat = np.zeros((len(modes), len(modes)), dtype=complex)
    for a, b, ph in pairs:
        mat[index[b], index[a]] = ph
        mat[index[a], index[b]] = np.conj(ph)
    return ModeUnitary(modes, mat)


def pbs(wiring: Mapping[str, tuple[str, str] | Mapping[str, str]], reflection_phase: complex = 1.0) -> ModeUnitary:
    """Polarizing beam splitter.

    ``wiring`` maps each of the two input labels to ``(H_out, V_out)``.
    ``reflection_phase`` multiplies the V (reflected) amplitudes; the default
    of 1 keeps every routed amplitude at +1.
    """
    routes = {}
    for src, dst in wiring.items():
        if isinstance(dst, Mapping):
            dst = (dst["H"], dst["V"])
        routes[str(src)] = (str(dst[0]), str(dst[1]))
    if len(routes) != 2:
        raise ValidationError(f"PBS needs exactly 2 inputs, got {sorted(routes)}")
    (a, (ah, av)), (b, (bh, bv)) = routes.items()
    outs = {ah, av}
    if ah == av or bh == bv:
        raise ValidationError("a PBS input must send H and V to different outputs")
    if ah == bh or av == bv or {bh, bv} != outs:
        raise ValidationError(f"inconsistent PBS wiring {routes}")
    if outs & {a, b}:
        raise ValidationError("PBS input and output labels must differ")
    pairs = []
    for src, (h, v) in routes.items():
        pairs.append((ModeId(src, Pol.H), ModeId(h, Pol.H), 1.0))
        pairs.append((ModeId(src, Pol.V), ModeId(v, Pol.V), reflection_phase))
    u = _swap_blocks(pairs)
    u.name = "PBS(" + ",".join(f"{s}:H>{h},V>{v}" for s, (h, v) in routes.items()) + ")"
    return u


def bs(in_a: str, in_b: str, out_a: str, out_b: str) -> ModeUnitary:
    """50:50 polarization-preserving beam splitter, real Hadamard convention."""
    labels = [in_a, in_b, out_a, out_b]
    if len(set(labels)) != 4:
        raise ValidationError(f"BS ports must be four distinct labels, got {labels}")
    r = 1.0 / math.sqrt(2.0)
    had = np.array([[r, r], [r, -r]])
    modes: list[ModeId] = []
    for p in Pol:
        modes += [ModeId(lab, p) for lab in labels]
    mat = np.zeros((8, 8), dtype=complex)
    for k in range(2):
        blk = slice(4 * k, 4 * k + 4)
        sub = np.zeros((4, 4))
        sub[2:, :2] = had
        sub[:2, 2:] = had.T
        mat[blk, blk] = sub
    return ModeUnitary(modes, mat, name=f"BS({in_a},{in_b}>{out_a},{out_b})")


@dataclass(frozen=True)
class ElementSpec:
    """One placed optical element.

    ``ports`` layout by kind::

        HWP, SIGMA_X, SIGMA_Z  {"mode": label}
        PBS                    {"in": {label: {"H": out, "V": out}, label: {...}}}
        BS                     {"in": [a, b], "out": [c, d]}
    """

    kind: str
    ports: Mapping[str, Any]
    theta: float | None = None
    label: str = ""
    reflection_phase: complex = field(default=1.0, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown element kind {self.kind!r}")
        if self.kind == "HWP" and self.theta is None:
            raise ValidationError("HWP needs an angle")
        if self.kind in ("HWP", "SIGMA_X", "SIGMA_Z") and "mode" not in self.ports:
            raise ValidationError(f"{self.kind} needs a 'mode' port")
        if self.kind == "PBS" and len(self.ports.get("in", {})) != 2:
            raise ValidationError("PBS needs two input ports")
        if self.kind == "BS" and (len(self.ports.get("in", ())) != 2 or len(self.ports.get("out", ())) != 2):
            raise ValidationError("BS needs two input and two output ports")

    def spatial_labels(self) -> set[str]:
        if self.kind == "PBS":
            labels = set(self.ports["in"])
            for dst in self.ports["in"].values():
                labels |= {dst["H"], dst["V"]}
            return labels
        if self.kind == "BS":
            return set(self.ports["in"]) | set(self.ports["out"])
        return {self.ports["mode"]}

    def compile(self) -> ModeUnitary:
        if self.kind == "HWP":
            u = hwp(self.theta, self.ports["mode"])
        elif self.kind in ("SIGMA_X", "SIGMA_Z"):
            u = pauli(self.kind, self.ports["mode"])
        elif self.kind == "PBS":
            u = pbs(self.ports["in"], reflection_phase=self.reflection_phase)
        else:
            (a, b), (c, d) = self.ports["in"], self.ports["out"]
            u = bs(a, b, c, d)
        if self.label:
            u.name = self.label
        return u

    def to_json(self) -> dict:
        doc: dict[str, Any] = {"kind": self.kind}
        if self.label:
            doc["label"] = self.label
        if self.theta is not None:
            doc["theta"] = self.theta
        if self.kind == "PBS":
            doc["ports"] = {"in": {k: {"H": v["H"], "V": v["V"]} for k, v in self.ports["in"].items()}}
        elif self.kind == "BS":
            doc["ports"] = {"in": list(self.ports["in"]), "out": list(self.ports["out"])}
        else:
            doc["ports"] = {"mode": self.ports["mode"]}
        return doc

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "ElementSpec":
        kind = doc["kind"]
        ports = doc["ports"]
        if kind == "PBS":
            ports = {"in": {k: {"H": str(v["H"]), "V": str(v["V"])} for k, v in ports["in"].items()}}
        elif kind == "BS":
            ports = {"in": tuple(map(str, ports["in"])), "out": tuple(map(str, ports["out"]))}
        else:
            ports = {"mode": str(ports["mode"])}
        theta = doc.get("theta")
        return cls(kind, ports, None if theta is None else float(theta), doc.get("label", ""))


def HWP(theta: float, mode: str, label: str = "") -> ElementSpec:
    return ElementSpec("HWP", {"mode": mode}, theta=theta, label=label)


def PBS(routes: Mapping[str, tuple[str, str]], label: str = "") -> ElementSpec:
    return ElementSpec("PBS", {"in": {k: {"H": h, "V": v} for k, (h, v) in routes.items()}}, label=label)


def BS(in_a: str, in_b: str, out_a: str, out_b: str, label: str = "") -> ElementSpec:
    return ElementSpec("BS", {"in": (in_a, in_b), "out": (out_a, out_b)}, label=label)


def SIGMA_X(mode: str, label: str = "") -> ElementSpec:
    return ElementSpec("SIGMA_X", {"mode": mode}, label=label)


def SIGMA_Z(mode: str, label: str = "") -> ElementSpec:
    return ElementSpec("SIGMA_Z", {"mode": mode}, label=label)
