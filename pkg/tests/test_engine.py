import math

import numpy as np
import pytest

from conftest import haar_qubit
from pgl import reference
from pgl.elements import BS, HWP, SIGMA_X
from pgl.engine import (
    Checkpoint,
    Circuit,
    ConfigurationError,
    Detect,
    DetectionRule,
    FeedForwardRule,
    PreconditionError,
    Reroute,
    measure_polarization,
    post_select,
    run,
    split_by_detection,
    success_branches,
    total_probability,
    trace_checkpoint,
)
from pgl.fock import FockState, Pol, RegistryError, ValidationError, apply_mode_unitary, inner_product
from pgl.gates import GateOptions, build_cpf_circuit, build_toffoli_circuit, encode_input

R2 = 1 / math.sqrt(2)
COEFFS2 = [(0.6, 0.8), (R2, -1j * R2)]
COEFFS3 = [(0.6, 0.8), (0.28, 0.96), (R2, R2)]


def test_unitary_only_circuit_has_one_branch():
    c = Circuit("hom", frozenset({"a", "b", "c", "d"}), (BS("a", "b", "c", "d"),), output_modes=(("c", "x"), ("d", "y")))
    branches = run(c, FockState.ket(("a", "H"), ("b", "H")))
    # HOM: nothing lands in the one-photon-per-output coincidence
    assert total_probability(branches) == pytest.approx(1)
    assert sum(b.probability for b in success_branches(branches)) == pytest.approx(0, abs=1e-30)
    c2 = Circuit("plate", frozenset({"a"}), (HWP(22.5, "a"),), output_modes=(("a", "x"),))
    (b,) = run(c2, FockState.ket(("a", "H")))
    assert b.success and b.probability == pytest.approx(1)


def test_circuit_validation():
    with pytest.raises(RegistryError):
        Circuit("bad", frozenset({"a"}), (HWP(22.5, "b"),))
    with pytest.raises(ValidationError):
        Circuit("bad", frozenset({"a"}), (Detect("D"),))
    with pytest.raises(ValidationError):
        Circuit("bad", frozenset({"a"}), (), detections=(DetectionRule("D", "a"),), output_modes=(("a", "x"),))
    with pytest.raises(ValidationError):
        Circuit("bad", frozenset({"a", "b"}), (), feed_forwards=(FeedForwardRule("D", "H", SIGMA_X("a")),))
    with pytest.raises(ValidationError):
        DetectionRule("D", "a", "energy")
    with pytest.raises(ValidationError):
        DetectionRule("D", "a", required_count=-1)


def test_photon_number_mismatch():
    with pytest.raises(ConfigurationError):
        run(build_cpf_circuit(), FockState.qubit("c_in", 1, 0))


@pytest.mark.parametrize("seed", range(100))
def test_branch_completeness_cpf(seed):
    rng = np.random.default_rng(seed)
    state = encode_input([haar_qubit(rng), haar_qubit(rng)], "CPF")
    assert total_probability(run(build_cpf_circuit(), state)) == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("opts", [GateOptions(), GateOptions(recycle=True), GateOptions(with_bs=False)])
def test_branch_completeness_toffoli(opts):
    rng = np.random.default_rng(5)
    circuit = build_toffoli_circuit(opts)
    for _ in range(100 if opts == GateOptions() else 10):
        state = encode_input([haar_qubit(rng) for _ in range(3)], "TOFFOLI")
        assert total_probability(run(circuit, state)) == pytest.approx(1, abs=1e-10)


def test_split_by_detection_is_orthogonal_and_complete():
    rng = np.random.default_rng(3)
    state = encode_input([haar_qubit(rng), haar_qubit(rng)], "CPF")
    c = build_cpf_circuit()
    for step in c.placements:
        if isinstance(step, Detect):
            break
        if not isinstance(step, Checkpoint):
            state = apply_mode_unitary(state, step.compile())
    parts = split_by_detection(state, c.detector("D3"))
    assert sum(p.norm2() for _, p in parts) == pytest.approx(state.norm2())
    outcomes = [o for o, _ in parts]
    assert len(outcomes) == len(set(outcomes))
    number = split_by_detection(state, DetectionRule("N", "3", "number", 1))
    assert sum(p.norm2() for _, p in number) == pytest.approx(state.norm2())


def test_branches_pairwise_orthogonal_before_detection():
    # unnormalized failure/success pieces of one run never overlap once the detector record is restored
    state = encode_input(COEFFS2, "CPF")
    branches = run(build_cpf_circuit(), state)
    keys = [(b.attempt, tuple(sorted(b.detector_record.items())), b.success) for b in branches]
    assert len(keys) == len(set(keys))


def test_determinism():
    state = encode_input(COEFFS3, "TOFFOLI")
    a = run(build_toffoli_circuit(), state)
    b = run(build_toffoli_circuit(), state)
    assert [x.key for x in a] == [y.key for y in b]
    for x, y in zip(a, b):
        assert x.probability == y.probability
        assert x.state.terms == y.state.terms


@pytest.mark.parametrize("build", [lambda: build_cpf_circuit(), lambda: build_toffoli_circuit(),
                                   lambda: build_toffoli_circuit(GateOptions(recycle=True)),
                                   lambda: build_toffoli_circuit(GateOptions(with_bs=False))])
def test_json_roundtrip(build):
    c = build()
    text = c.dumps()
    again = Circuit.loads(text)
    assert again.dumps() == text
    assert again == c
    assert text.endswith("\n") and '"schema_version": 1' in text


def test_json_rejects_unknown_version():
    doc = build_cpf_circuit().to_json()
    doc["schema_version"] = doc["version"] = 99
    with pytest.raises(ValidationError):
        Circuit.from_json(doc)


def test_post_select_after_first_parity_check():
    a1, b1 = COEFFS2[0]
    refs = reference.cpf_states(COEFFS2)
    out, p = post_select(refs["after-PBS1"], {"1": 1, "2": 1})
    assert p == pytest.approx(0.5)
    assert out.max_deviation(refs["after-PBS1-postselect"]) < 1e-12


def test_post_select_identity_and_empty():
    s = FockState.ket(("1", "H"), ("2", "V"))
    out, p = post_select(s, {"1": 1, "2": 1})
    assert p == 1 and out.max_deviation(s) == 0
    out, p = post_select(s, {"1": 2})
    assert p == 0 and out.is_zero()
    with pytest.raises(RegistryError):
        post_select(s, {"9": 1}, registry={"1", "2"})


def test_post_select_modes_3_and_4():
    refs = reference.cpf_states(COEFFS2)
    out, p = post_select(refs["after-HWP2"], {"3": 1, "4": 1})
    assert p == pytest.approx(0.5)  # conditional on the PBS1 post-selection: 1/2 * 1/2 overall
    assert out.max_deviation(refs["after-34-postselect"]) < 1e-12


def test_measure_polarization_on_mode_3():
    refs = reference.cpf_states(COEFFS2)
    outcomes = measure_polarization(refs["after-34-postselect"], "3")
    assert [o for o, _, _ in outcomes] == [Pol.H, Pol.V]
    for pol, p, st in outcomes:
        assert p == pytest.approx(0.5)
        assert st.max_deviation(refs[f"after-D3:{pol.name}"]) < 1e-12


def test_measure_polarization_trivial_and_precondition():
    (res,) = measure_polarization(FockState.ket(("3", "H"), ("4", "V")), "3")
    assert res[0] == Pol.H and res[1] == pytest.approx(1)
    with pytest.raises(PreconditionError):
        measure_polarization(FockState.ket(("4", "V")), "3")


def test_measure_mode_12_collapses_to_output():
    refs = reference.toffoli_states(COEFFS3)
    outcomes = {pol: st for pol, _, st in measure_polarization(refs["after-PBS6-block"].filter(
        lambda k: k.spatial_count("9") == 1), "12")}
    target = refs["output"]
    assert outcomes[Pol.V].max_deviation(target) < 1e-12


def test_trace_checkpoint_input_and_unknown():
    state = encode_input(COEFFS2, "CPF")
    branches = run(build_cpf_circuit(), state)
    snap, p = trace_checkpoint(branches, "input")
    assert p == pytest.approx(1) and snap.max_deviation(state) < 1e-15
    snap, _ = trace_checkpoint(branches, "after-PBS1")
    assert snap.max_deviation(reference.cpf_states(COEFFS2)["after-PBS1"]) < 1e-12
    with pytest.raises(KeyError):
        trace_checkpoint(branches, "nowhere")


def test_feed_forward_is_an_involution():
    c = build_cpf_circuit()
    ff = c.feed_forwards[0].action.compile()
    s = FockState.qubit("4", 0.6, 0.8j)
    assert apply_mode_unitary(apply_mode_unitary(s, ff), ff).max_deviation(s) < 1e-15


def test_reroute_moves_source_component():
    reg = frozenset({"s", "t", "o"})
    c = Circuit("r", reg, (Reroute("s", "t"),), output_modes=(("t", "x"),))
    state = FockState({next(iter(FockState.ket(("s", "H")).terms)): R2, next(iter(FockState.ket(("t", "V")).terms)): R2})
    branches = run(c, state)
    assert sorted(b.attempt for b in branches) == [1, 2]
    assert all(b.success for b in branches)
    assert total_probability(branches) == pytest.approx(1)


def test_number_detector_failure_marks_branch():
    reg = frozenset({"a", "b", "c", "d"})
    c = Circuit("n", reg, (BS("a", "b", "c", "d"), Detect("Dd")), detections=(DetectionRule("Dd", "d", "number", 0),),
                output_modes=(("c", "x"),))
    branches = run(c, FockState.ket(("a", "H")))
    ok = [b for b in branches if b.success]
    assert len(ok) == 1 and ok[0].probability == pytest.approx(0.5)
    assert [b.detector_record["Dd"] for b in branches if not b.success] == [1]
