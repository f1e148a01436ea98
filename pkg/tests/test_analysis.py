import math

import numpy as np
import pytest

from pgl.analysis import (
    CSV_HEADER,
    UndefinedFidelityError,
    average_over_alpha2,
    checkpoint_report,
    evaluate,
    f_quoted_no_bs,
    fit_shape,
    gate_fidelity,
    kraus_map,
    kraus_metrics,
    p_quoted_no_recycle,
    p_quoted_recycle,
    parse_grid,
    random_qubits,
    success_probability,
    sweep_alpha2,
    truth_table,
)
from pgl.engine import Circuit
from pgl.elements import BS
from pgl.fock import FockState
from pgl.gates import GateOptions, build_cpf_circuit, build_toffoli_circuit, ideal_gate, product_vector

R2 = 1 / math.sqrt(2)


def test_cpf_success_probability_and_fidelity():
    c = build_cpf_circuit()
    x = [(0.6, 0.8), (R2, 1j * R2)]
    assert success_probability(c, x) == pytest.approx(0.25)
    assert gate_fidelity(c, x) == pytest.approx(1)


def test_toffoli_endpoints_without_recycling():
    c = build_toffoli_circuit()
    plus = (R2, R2)
    assert success_probability(c, [plus, (1, 0), plus]) == pytest.approx(1 / 32, abs=1e-12)
    assert success_probability(c, [plus, (0, 1), plus]) == pytest.approx(1 / 64, abs=1e-12)


def test_fidelity_of_eigenvector_input():
    assert gate_fidelity(build_toffoli_circuit(), [(1, 0), (1, 0), (1, 0)]) == pytest.approx(1)


def test_fidelity_undefined_when_never_accepted():
    c = Circuit("hom", frozenset({"a", "b", "c", "d"}), (BS("a", "b", "c", "d"),), output_modes=(("c", "x"), ("d", "y")),
                inputs=("a", "b"))
    with pytest.raises(UndefinedFidelityError):
        gate_fidelity(c, np.array([1, 0, 0, 0], dtype=complex), ideal=np.eye(4))


def test_kraus_map_reproduces_direct_runs():
    c = build_toffoli_circuit()
    kraus = kraus_map(c)
    rng = np.random.default_rng(8)
    for _ in range(5):
        q = [tuple(v / np.linalg.norm(v)) for v in rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))]
        direct = evaluate(c, q)
        p, f = kraus_metrics(kraus, product_vector(q), ideal_gate("TOFFOLI"))
        assert p == pytest.approx(direct.probability, abs=1e-14)
        assert f == pytest.approx(direct.fidelity, abs=1e-12)


def test_cpf_truth_table():
    t = truth_table(build_cpf_circuit())
    assert np.allclose(t.probability, 0.25)
    assert np.allclose(t.population, np.eye(4))
    assert np.allclose(t.fidelity, 1)
    assert "HH" in t.format()


def test_toffoli_truth_table_is_a_permutation():
    t = truth_table(build_toffoli_circuit(), "TOFFOLI")
    assert np.allclose(t.population, np.abs(ideal_gate("TOFFOLI")) ** 2)


def test_closed_forms():
    assert p_quoted_recycle(math.sqrt(0.5)) == pytest.approx(9 / 256)
    assert p_quoted_recycle(0) == pytest.approx(1 / 32)
    assert p_quoted_no_recycle(1) == pytest.approx(1 / 32)
    assert f_quoted_no_bs(0) == 1 and f_quoted_no_bs(1) == pytest.approx(1)


def test_averages():
    assert average_over_alpha2(p_quoted_no_recycle) == pytest.approx(1 / 48, abs=1e-9)
    assert average_over_alpha2(p_quoted_recycle) == pytest.approx(1 / 30, abs=1e-9)
    assert average_over_alpha2(f_quoted_no_bs) == pytest.approx((3 * math.pi + 2) / 12, abs=1e-9)
    assert average_over_alpha2(lambda a: 1.0) == pytest.approx(1)


def test_average_rejects_non_finite():
    with pytest.raises(ValueError):
        average_over_alpha2(lambda a: 1 / a if a else math.inf)
    with pytest.raises(ValueError):
        average_over_alpha2(lambda a: math.nan)


def test_parse_grid():
    g = parse_grid("-1:1:0.01")
    assert len(g) == 201 and g[0] == -1 and g[-1] == 1
    assert list(parse_grid("0:1:1/4")) == [0, 0.25, 0.5, 0.75, 1]
    for bad in ("1:0:0.1", "0:1:0", "0:1", "a:b:c"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_random_qubits_are_seeded_and_normalized():
    a, b = random_qubits(3, 20), random_qubits(3, 20)
    assert a == b and len(a) == 20
    for q1, q3 in a:
        assert abs(q1[0]) ** 2 + abs(q1[1]) ** 2 == pytest.approx(1)
        assert abs(q3[0]) ** 2 + abs(q3[1]) ** 2 == pytest.approx(1)


def test_sweep_rejects_bad_grid():
    for grid in ([-1.5, 0], [0.5, 0.1], []):
        with pytest.raises(ValueError):
            sweep_alpha2(grid)


def test_sweep_csv_format():
    t = sweep_alpha2([-1, 0, 0.5, 1], GateOptions(), seed=3, draws=4)
    text = t.to_csv()
    lines = text.split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert text.endswith("\n") and "\r" not in text
    assert lines[1].startswith("-1,0.03125,0.03125,")
    assert lines[1].endswith(",with_bs=1;recycle=0;feed_forward=1,3")
    assert np.all((t.p_sim >= 0) & (t.p_sim <= 1)) and np.all((t.f_sim >= 0) & (t.f_sim <= 1 + 1e-12))
    assert t.to_json()["schema_version"] == 1


def test_sweep_is_deterministic_across_threads(monkeypatch):
    grid = np.linspace(-1, 1, 9)
    a = sweep_alpha2(grid, seed=5, draws=3).to_csv()
    monkeypatch.setenv("PGL_THREADS", "4")
    assert sweep_alpha2(grid, seed=5, draws=3).to_csv() == a


def test_probability_is_phase_invariant():
    c = build_toffoli_circuit()
    base = success_probability(c, [(0.6, 0.8), (0.28, 0.96), (R2, R2)])
    rotated = success_probability(c, [(0.6j, 0.8), (0.28, -0.96j), (R2, R2 * np.exp(0.3j))])
    assert rotated == pytest.approx(base, abs=1e-14)


def test_no_recycling_shape():
    grid = np.linspace(-1, 1, 21)
    t = sweep_alpha2(grid, GateOptions(), draws=3)
    assert np.allclose(t.p_sim, t.p_sim[::-1], atol=1e-12)
    c, resid = fit_shape(grid, t.p_sim, lambda a: 1 + a * a)
    assert resid < 1e-9


def test_recycling_dominates():
    grid = np.linspace(-1, 1, 21)
    plain = sweep_alpha2(grid, GateOptions(), draws=3)
    rec = sweep_alpha2(grid, GateOptions(recycle=True), draws=3)
    assert np.all(rec.p_sim >= plain.p_sim - 1e-12)
    strict = np.abs(grid) < 1 - 1e-9
    assert np.all(rec.p_sim[strict] > plain.p_sim[strict])


def test_without_bs_endpoints_have_unit_fidelity():
    t = sweep_alpha2([-1, 0, 1], GateOptions(with_bs=False))
    assert np.allclose(t.f_sim, 1, atol=1e-9)
    assert np.allclose(t.f_paper, 1)


def test_checkpoint_report_localizes_first_difference():
    rows = checkpoint_report(GateOptions(), [(0.6, 0.8), (0.28, 0.96), (R2, R2)])
    labels = [r.label for r in rows]
    assert labels[0] == "after-PBS1-postselect" and labels[-1] == "output"
    assert rows[0].deviation < 1e-12
    assert all(r.ratio == pytest.approx(1) for r in rows)
