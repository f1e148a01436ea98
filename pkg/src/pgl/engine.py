"""Circuit description and branch-enumerating execution.

A circuit is an ordered list of steps. Besides optical elements there are
three bookkeeping steps:

``Detect``      measure a spatial label with an ideal photon-number-resolving
                detector (optionally behind a PBS), split into outcome branches
                and apply any feed-forward registered for the outcome;
``Checkpoint``  record a projected snapshot of every live branch;
``Reroute``     split off the component with photons in ``source`` and send it
                through the rest of the circuit again as a second attempt,
                relabelled onto ``target``.

Branch states are carried unnormalized so that a branch probability is just
its squared norm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence, Union

from .elements import ElementSpec
from .fock import (
    BasisKet,
    FockError,
    FockState,
    Pol,
    RegistryError,
    SectorError,
    ValidationError,
    apply_mode_unitary,
)

SCHEMA_VERSION = 1


class ConfigurationError(FockError, ValueError):
    """Circuit/input mismatch detected before running."""


class PreconditionError(FockError, ValueError):
    """A measurement was requested on a state that does not satisfy its precondition."""


@dataclass(frozen=True)
class DetectionRule:
    """Ideal detection of one spatial label.

    ``basis`` is ``"polarization"`` (PBS followed by one detector per output,
    outcome ``(n_H, n_V)``) or ``"number"`` (outcome is the total count).
    """

    name: str
    label: str
    basis: str = "polarization"
    required_count: int = 1

    def __post_init__(self):
        if self.basis not in ("polarization", "number"):
            raise ValidationError(f"unknown detection basis {self.basis!r}")
        if self.required_count < 0:
            raise ValidationError("required_count must be non-negative")


@dataclass(frozen=True)
class FeedForwardRule:
    """Apply ``action`` when detector ``detector`` clicks once with polarization ``outcome``."""

    detector: str
    outcome: str
    action: ElementSpec

    def __post_init__(self):
        if self.outcome not in ("H", "V"):
            raise ValidationError("feed-forward outcome must be 'H' or 'V'")
        self.action.compile()

    def matches(self, outcome) -> bool:
        want = (1, 0) if self.outcome == "H" else (0, 1)
        return outcome == want


@dataclass(frozen=True)
class Detect:
    detector: str


@dataclass(frozen=True)
class Checkpoint:
    """Snapshot label plus a projection.

    ``project`` maps spatial labels to an allowed photon count or a collection
    of allowed counts; kets violating it are dropped from the snapshot.
    """

    label: str
    project: Mapping[str, Any] = field(default_factory=dict)

    def allowed(self) -> dict[str, frozenset[int]]:
        out = {}
        for lab, v in self.project.items():
            out[lab] = frozenset([v]) if isinstance(v, int) else frozenset(v)
        return out


@dataclass(frozen=True)
class Reroute:
    source: str
    target: str
    name: str = "recycle"


Step = Union[ElementSpec, Detect, Checkpoint, Reroute]


@dataclass(frozen=True)
class Circuit:
    name: str
    registry: frozenset[str]
    placements: tuple[Step, ...]
    detections: tuple[DetectionRule, ...] = ()
    feed_forwards: tuple[FeedForwardRule, ...] = ()
    output_modes: tuple[tuple[str, str], ...] = ()
    photons: int | None = None
    inputs: tuple[str, ...] = ()
    ancillas: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "registry", frozenset(self.registry))
        reg = self.registry
        for lab in self.output_labels + tuple(self.inputs) + tuple(self.ancillas):
            if lab not in reg:
                raise RegistryError(f"label {lab!r} is not registered")
        names = [d.name for d in self.detections]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate detector names")
        dets = {d.name: d for d in self.detections}
        for d in self.detections:
            if d.label not in reg:
                raise RegistryError(f"detector {d.name} watches unregistered label {d.label!r}")
            if d.label in self.output_labels:
                raise ValidationError(f"detector {d.name} watches output mode {d.label!r}")
        for step in self.placements:
            if isinstance(step, ElementSpec):
                missing = step.spatial_labels() - reg
                if missing:
                    raise RegistryError(f"{step.kind} {step.label} uses unregistered labels {sorted(missing)}")
            elif isinstance(step, Detect):
                if step.detector not in dets:
                    raise ValidationError(f"undeclared detector {step.detector!r}")
            elif isinstance(step, Checkpoint):
                missing = set(step.project) - reg
                if missing:
                    raise RegistryError(f"checkpoint {step.label} projects unregistered labels {sorted(missing)}")
            elif isinstance(step, Reroute):
                if {step.source, step.target} - reg:
                    raise RegistryError("reroute uses unregistered labels")
            else:
                raise ValidationError(f"unknown step {step!r}")
        for ff in self.feed_forwards:
            if ff.detector not in dets:
                raise ValidationError(f"feed-forward triggered by undeclared detector {ff.detector!r}")
            if dets[ff.detector].basis != "polarization":
                raise ValidationError("feed-forward needs a polarization-resolved detector")
            missing = ff.action.spatial_labels() - reg
            if missing:
                raise RegistryError(f"feed-forward acts on unregistered labels {sorted(missing)}")

    @property
    def output_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.output_modes)

    @property
    def checkpoint_labels(self) -> list[str]:
        return [s.label for s in self.placements if isinstance(s, Checkpoint)]

    def elements(self) -> list[ElementSpec]:
        return [s for s in self.placements if isinstance(s, ElementSpec)]

    def detector(self, name: str) -> DetectionRule:
        for d in self.detections:
            if d.name == name:
                return d
        raise KeyError(name)

    def without_feed_forward(self) -> "Circuit":
        return Circuit(
            self.name, self.registry, self.placements, self.detections, (), self.output_modes,
            self.photons, self.inputs, self.ancillas,
        )

    # serialization

    def to_json(self) -> dict:
        placements = []
        for s in self.placements:
            if isinstance(s, ElementSpec):
                placements.append(s.to_json())
            elif isinstance(s, Detect):
                placements.append({"kind": "DETECT", "detector": s.detector})
            elif isinstance(s, Checkpoint):
                proj = {k: (v if isinstance(v, int) else sorted(v)) for k, v in s.project.items()}
                placements.append({"kind": "CHECKPOINT", "label": s.label, "project": proj})
            else:
                placements.append({"kind": "REROUTE", "source": s.source, "target": s.target, "name": s.name})
        return {
            "schema_version": SCHEMA_VERSION,
            "version": SCHEMA_VERSION,
            "name": self.name,
            "registry": sorted(self.registry),
            "placements": placements,
            "detections": [
                {"name": d.name, "label": d.label, "basis": d.basis, "required_count": d.required_count}
                for d in self.detections
            ],
            "feed_forwards": [
                {"detector": f.detector, "outcome": f.outcome, "action": f.action.to_json()}
                for f in self.feed_forwards
            ],
            "outputs": [{"mode": lab, "name": name} for lab, name in self.output_modes],
            "photons": self.photons,
            "inputs": list(self.inputs),
            "ancillas": list(self.ancillas),
        }

    def dumps(self) -> str:
        return dumps_canonical(self.to_json())

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "Circuit":
        version = doc.get("schema_version", doc.get("version"))
        if version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported circuit schema version {version!r}")
        steps: list[Step] = []
        for p in doc["placements"]:
            kind = p["kind"]
            if kind == "DETECT":
                steps.append(Detect(p["detector"]))
            elif kind == "CHECKPOINT":
                proj = {k: (v if isinstance(v, int) else tuple(v)) for k, v in p.get("project", {}).items()}
                steps.append(Checkpoint(p["label"], proj))
            elif kind == "REROUTE":
                steps.append(Reroute(p["source"], p["target"], p.get("name", "recycle")))
            else:
                steps.append(ElementSpec.from_json(p))
        return cls(
            name=doc.get("name", ""),
            registry=frozenset(doc["registry"]),
            placements=tuple(steps),
            detections=tuple(DetectionRule(**d) for d in doc.get("detections", [])),
            feed_forwards=tuple(
                FeedForwardRule(f["detector"], f["outcome"], ElementSpec.from_json(f["action"]))
                for f in doc.get("feed_forwards", [])
            ),
            output_modes=tuple((o["mode"], o["name"]) for o in doc.get("outputs", [])),
            photons=doc.get("photons"),
            inputs=tuple(doc.get("inputs", ())),
            ancillas=tuple(doc.get("ancillas", ())),
        )

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        return cls.from_json(json.loads(text))


def dumps_canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


@dataclass
class TraceEntry:
    label: str
    state: FockState
    probability: float
    record: dict[str, Any] = field(default_factory=dict)
    attempt: int = 1


@dataclass
class BranchOutcome:
    """One terminal branch of a run.

    ``state`` is normalized on the output modes for success branches; for
    failure branches it is whatever survived (possibly the zero state).
    """

    detector_record: dict[str, Any]
    probability: float
    state: FockState
    success: bool
    trace: list[TraceEntry] = field(default_factory=list)
    feed_forward: tuple[str, ...] = ()
    attempt: int = 1

    @property
    def key(self) -> tuple:
        return (self.attempt,) + tuple(sorted(self.detector_record.items()))

    def clicks(self) -> dict[str, str]:
        """Polarization of every single-click polarization detector in the record."""
        out = {}
        for name, rec in self.detector_record.items():
            if rec == (1, 0):
                out[name] = "H"
            elif rec == (0, 1):
                out[name] = "V"
        return out


@dataclass
class _Live:
    state: FockState
    record: dict[str, Any]
    trace: list[TraceEntry]
    ff: list[str]
    attempt: int = 1


def _strip(state: FockState, labels: Iterable[str]) -> FockState:
    labels = list(labels)
    out: dict[BasisKet, complex] = {}
    n = None
    for k, a in state.terms.items():
        kk = k.without(labels)
        n = kk.photon_number
        out[kk] = out.get(kk, 0j) + a
    return FockState(out, photon_number=n, prune=state.prune)


def split_by_detection(state: FockState, rule: DetectionRule) -> list[tuple[Any, FockState]]:
    """Partition ``state`` by detector outcome; measured photons are removed from the kets.

    Returned states are unnormalized and have disjoint ket supports before the
    measured label is stripped, so they are mutually orthogonal. A number-only
    detector can return several entries with the same outcome (one per
    polarization split of the detected photons).
    """
    # Split on the full (n_H, n_V) even for number-only detectors: stripping the
    # label must never merge kets that differ in the detected photons.
    groups: dict[tuple[int, int], dict[BasisKet, complex]] = {}
    for k, a in state.terms.items():
        key = (k.count((rule.label, Pol.H)), k.count((rule.label, Pol.V)))
        groups.setdefault(key, {})[k] = a
    out = []
    for key, terms in sorted(groups.items()):
        outcome = key if rule.basis == "polarization" else sum(key)
        out.append((outcome, _strip(FockState(terms, prune=state.prune), [rule.label])))
    return out


def _project(state: FockState, allowed: Mapping[str, frozenset[int]]) -> FockState:
    return state.filter(lambda k: all(k.spatial_count(lab) in ok for lab, ok in allowed.items()))


def post_select(state: FockState, pattern: Mapping[str, int], registry: Iterable[str] | None = None):
    """Keep kets with exactly ``pattern[label]`` photons per spatial label.

    Returns ``(normalized state, probability)``; an empty remainder gives the
    zero state and probability 0.
    """
    if registry is not None:
        missing = set(pattern) - set(registry)
        if missing:
            raise RegistryError(f"unregistered labels {sorted(missing)}")
    kept = state.filter(lambda k: all(k.spatial_count(lab) == n for lab, n in pattern.items()))
    p = kept.norm2()
    if kept.is_zero() or p == 0.0:
        return FockState(photon_number=state.photon_number), 0.0
    return kept * (1.0 / math.sqrt(p)), p


def measure_polarization(state: FockState, label: str) -> list[tuple[Pol, float, FockState]]:
    """Measure the polarization of the single photon in ``label``.

    Probabilities sum to the squared norm of ``state``; each collapsed state is
    normalized with ``label`` removed.
    """
    for k in state.terms:
        if k.spatial_count(label) != 1:
            raise PreconditionError(f"ket {k!r} does not hold exactly one photon in {label!r}")
    out = []
    for pol in Pol:
        part = state.filter(lambda k: k.count((label, pol)) == 1)
        p = part.norm2()
        if part.is_zero():
            continue
        out.append((pol, p, _strip(part, [label]) * (1.0 / math.sqrt(p))))
    return out


def _snapshot(label: str, branch: _Live, cp: Checkpoint) -> TraceEntry:
    part = _project(branch.state, cp.allowed())
    p = part.norm2()
    snap = part * (1.0 / math.sqrt(p)) if p > 0 else part
    return TraceEntry(label, snap, p, dict(branch.record), branch.attempt)


def run(circuit: Circuit, state: FockState, apply_feed_forward: bool = True) -> list[BranchOutcome]:
    """Run ``state`` through ``circuit`` and return every terminal branch.

    Branch order is deterministic: failures in the order they arise, then the
    surviving branches (success first) in detector-outcome order.
    """
    if circuit.photons is not None and state.photon_number != circuit.photons:
        raise ConfigurationError(
            f"circuit {circuit.name} expects {circuit.photons} photons, input has {state.photon_number}"
        )
    unknown = state.labels() - circuit.registry
    if unknown:
        raise RegistryError(f"input occupies unregistered labels {sorted(unknown)}")

    compiled: dict[int, Any] = {}
    rules = {d.name: d for d in circuit.detections}
    ffs: dict[str, list[FeedForwardRule]] = {}
    if apply_feed_forward:
        for f in circuit.feed_forwards:
            ffs.setdefault(f.detector, []).append(f)

    live = [_Live(state, {}, [], [])]
    done: list[BranchOutcome] = []

    for idx, step in enumerate(circuit.placements):
        if isinstance(step, ElementSpec):
            u = compiled.get(idx)
            if u is None:
                u = compiled[idx] = step.compile()
            for b in live:
                b.state = apply_mode_unitary(b.state, u)
        elif isinstance(step, Checkpoint):
            for b in live:
                b.trace.append(_snapshot(step.label, b, step))
        elif isinstance(step, Reroute):
            nxt = []
            for b in live:
                # kets with the target already occupied cannot be relabelled; they
                # stay in this attempt and end up rejected by the coincidence test
                movable = lambda k: k.spatial_count(step.source) > 0 and k.spatial_count(step.target) == 0
                stay = b.state.filter(lambda k: not movable(k))
                move = b.state.filter(movable)
                if not stay.is_zero():
                    nxt.append(_Live(stay, dict(b.record), list(b.trace), list(b.ff), b.attempt))
                if not move.is_zero():
                    nxt.append(
                        _Live(move.relabel({step.source: step.target}), dict(b.record), list(b.trace), list(b.ff),
                              b.attempt + 1)
                    )
            live = nxt
        else:
            rule = rules[step.detector]
            nxt = []
            for b in live:
                for outcome, sub in split_by_detection(b.state, rule):
                    record = dict(b.record)
                    record[rule.name] = outcome
                    total = sum(outcome) if isinstance(outcome, tuple) else outcome
                    if total != rule.required_count:
                        done.append(_terminal(sub, record, b, success=False))
                        continue
                    applied = list(b.ff)
                    for f in ffs.get(rule.name, ()):
                        if f.matches(outcome):
                            sub = apply_mode_unitary(sub, f.action.compile())
                            applied.append(f"{f.action.kind}@{f.action.ports['mode']}")
                    nxt.append(_Live(sub, record, list(b.trace), applied, b.attempt))
            live = nxt

    outputs = set(circuit.output_labels)
    for b in live:
        accept = lambda k: k.labels() <= outputs and all(k.spatial_count(lab) == 1 for lab in outputs)
        ok = b.state.filter(accept)
        rest = b.state.filter(lambda k: not accept(k))
        if not ok.is_zero():
            done.append(_terminal(ok, b.record, b, success=True))
        if not rest.is_zero():
            done.append(_terminal(rest, b.record, b, success=False))
    return done


def _terminal(state: FockState, record: dict, b: _Live, success: bool) -> BranchOutcome:
    p = state.norm2()
    st = state * (1.0 / math.sqrt(p)) if p > 0 else state
    return BranchOutcome(dict(record), p, st, success, list(b.trace), tuple(b.ff), b.attempt)


def trace_checkpoint(
    branches: Sequence[BranchOutcome], label: str, record: Mapping[str, Any] | None = None, attempt: int = 1
) -> tuple[FockState, float]:
    """Snapshot and cumulative probability of checkpoint ``label``.

    Checkpoints reached after a detection exist once per outcome; pick one with
    ``record`` (a subset of the detector record to match).
    """
    for br in branches:
        if br.attempt != attempt:
            continue
        if record and any(br.detector_record.get(k) != v for k, v in record.items()):
            continue
        for entry in br.trace:
            if entry.label == label:
                return entry.state, entry.probability
    raise KeyError(f"checkpoint {label!r} not reached by any matching branch")


def total_probability(branches: Sequence[BranchOutcome]) -> float:
    return float(sum(b.probability for b in branches))


def success_branches(branches: Sequence[BranchOutcome]) -> list[BranchOutcome]:
    return [b for b in branches if b.success]


__all__ = [
    "BranchOutcome",
    "Checkpoint",
    "Circuit",
    "ConfigurationError",
    "Detect",
    "DetectionRule",
    "FeedForwardRule",
    "PreconditionError",
    "Reroute",
    "SectorError",
    "dumps_canonical",
    "measure_polarization",
    "post_select",
    "run",
    "split_by_detection",
    "success_branches",
    "total_probability",
    "trace_checkpoint",
]
