import csv
import io
import json
import shutil
import subprocess

import pytest

from pgl.cli import main
from pgl.numbers import parse_complex, parse_real


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def _usage(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    capsys.readouterr()
    return exc.value.code


def test_numbers():
    assert parse_real("1/64") == 1 / 64
    assert parse_real("-0.25") == -0.25
    assert parse_real("sqrt(1/2)") == pytest.approx(2**-0.5)
    assert parse_real("-sqrt(2)") == pytest.approx(-(2**0.5))
    assert parse_complex("0.5+0.5j") == 0.5 + 0.5j
    for bad in ("x", "1/0", "sqrt(-1)"):
        with pytest.raises(ValueError):
            parse_real(bad)


def test_cpf_verify_vv(capsys):
    code, out = _run(capsys, "cpf-verify", "--input", "VV")
    assert code == 0
    assert "0.2500000000" in out and "-1.000000" in out and "PASS" in out


def test_cpf_verify_defaults_and_json(capsys):
    code, out = _run(capsys, "cpf-verify", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1 and doc["pass"]
    assert [d["input"] for d in doc["inputs"]] == ["HH", "HV", "VH", "VV", "++"]


def test_cpf_verify_fractions_and_negative_values(capsys):
    code, out = _run(capsys, "cpf-verify", "--alpha1", "sqrt(1/2)", "--beta1", "-sqrt(1/2)", "--alpha2", "1/64")
    assert code == 0


def test_toffoli_verify_basis_inputs_pass(capsys):
    code, out = _run(capsys, "toffoli-verify", "--input", "HHH,VVH,VVV")
    assert code == 0
    assert out.count("PASS") == 3


def test_toffoli_verify_reports_first_failing_checkpoint(capsys):
    code, out = _run(capsys, "toffoli-verify", "--alpha1", "0.6", "--alpha2", "0.28", "--alpha3", "sqrt(1/2)")
    assert code == 1
    assert "first failing checkpoint: after-PBS3-postselect" in out


def test_toffoli_verify_json(capsys):
    code, out = _run(capsys, "toffoli-verify", "--no-bs", "--input", "VVV", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["options"] == "with_bs=0;recycle=0;feed_forward=1"
    assert len(doc["inputs"][0]["combos"]) == 4


def test_truth_table(capsys):
    code, out = _run(capsys, "truth-table", "--gate", "toffoli", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["labels"][6] == "VVH" and doc["population"][6][7] == 1.0


def test_sweep_is_byte_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--grid", "-1:1:0.25", "--seed", "9", "--out", str(a)]) == 0
    assert main(["sweep", "--grid", "-1:1:0.25", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.read_text())))
    assert len(rows) == 9 and rows[0]["seed"] == "9"


def test_sweep_without_bs_quoted_endpoints(capsys):
    code, out = _run(capsys, "sweep", "--no-bs", "--grid", "-1:1:0.5")
    rows = {float(r["alpha2"]): r for r in csv.DictReader(io.StringIO(out))}
    for a in (-1.0, 0.0, 1.0):
        assert float(rows[a]["f_paper"]) == 1.0
        assert float(rows[a]["f_sim"]) == pytest.approx(1, abs=1e-9)


def test_sweep_json(capsys):
    code, out = _run(capsys, "sweep", "--grid", "0:1:0.5", "--recycle", "--format", "json")
    doc = json.loads(out)
    assert doc["schema_version"] == 1 and len(doc["rows"]) == 3


def test_trace(capsys):
    code, out = _run(capsys, "trace", "--gate", "cpf", "--checkpoint", "after-34-postselect")
    assert code == 0
    code, out = _run(capsys, "trace", "--checkpoint", "after-D6", "--no-bs", "--record", "D6=V")
    assert code == 0
    code, out = _run(capsys, "trace", "--checkpoint", "after-PBS5-postselect", "--alpha2", "0.28")
    assert code == 1 and "first failing checkpoint: after-PBS3-postselect" in out


def test_trace_json(capsys):
    code, out = _run(capsys, "trace", "--checkpoint", "after-PBS1-postselect", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["max_deviation"] < 1e-12 and doc["terms"]


def test_oracle_check(capsys):
    code, out = _run(capsys, "oracle-check", "--modes", "3", "--photons", "3", "--trials", "200")
    assert code == 0 and "PASS" in out


def test_dump_and_reload_circuit(tmp_path, capsys):
    path = tmp_path / "cpf.json"
    assert main(["dump-circuit", "--gate", "cpf", "--out", str(path)]) == 0
    code, out = _run(capsys, "dump-circuit", "--circuit", str(path))
    assert out == path.read_text()
    code, out = _run(capsys, "truth-table", "--circuit", str(path))
    assert code == 0 and "0.250000000" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["cpf-verify", "--alpha1", "abc"],
        ["cpf-verify", "--alpha1", "0.6", "--beta1", "0.6"],
        ["cpf-verify", "--alpha3", "1"],
        ["cpf-verify", "--input", "VVV"],
        ["cpf-verify", "--format", "csv"],
        ["toffoli-verify", "--no-bs", "--recycle"],
        ["sweep", "--grid", "1:0:0.1"],
        ["sweep", "--grid", "-2:1:0.5"],
        ["trace", "--checkpoint", "nowhere"],
        ["dump-circuit", "--circuit", "/nonexistent.json"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert _usage(capsys, *argv) == 2


@pytest.mark.skipif(shutil.which("pgl") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["pgl", "cpf-verify", "--input", "HH"], capture_output=True, text=True)
    assert res.returncode == 0 and "PASS" in res.stdout
    res = subprocess.run(["pgl", "sweep", "--grid"], capture_output=True, text=True)
    assert res.returncode == 2
