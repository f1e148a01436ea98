"""``pgl`` command-line front end.

Exit status: 0 when every requested check passes, 1 when a check fails (with a
diagnostic naming the first failing checkpoint), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, reference
from .engine import Circuit, dumps_canonical, run, success_branches, trace_checkpoint
from .fock import FockError, FockState
from .gates import (
    GateOptions,
    basis_label,
    build_cpf_circuit,
    build_toffoli_circuit,
    decode_output,
    encode_logical,
    ideal_gate,
    n_qubits,
    parse_basis_label,
    product_vector,
)
from .numbers import parse_complex, parse_real
from .oracle import oracle_check

SCHEMA_VERSION = 1
CPF_TOL = 1e-10
TOFFOLI_TOL = 1e-9
TRACE_TOL = 1e-9
ORACLE_TOL = 1e-10
# Detector outcome -> feed-forward expected on the surviving photon.
FEED_FORWARD_TABLE = {("D6", "H"): "none", ("D6", "V"): "sigma_x on {five}", ("D12", "H"): "sigma_x on 11", ("D12", "V"): "none"}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing


def _complex_arg(text: str) -> complex:
    try:
        return parse_complex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _real_arg(text: str) -> float:
    try:
        return parse_real(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_arg(text: str) -> int:
    try:
        return int(parse_real(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parents():
    coeffs = argparse.ArgumentParser(add_help=False)
    g = coeffs.add_argument_group("input state")
    for q in (1, 2, 3):
        g.add_argument(f"--alpha{q}", type=_complex_arg, help=f"H amplitude of qubit {q} (decimal, fraction or sqrt(x))")
        g.add_argument(f"--beta{q}", type=_complex_arg, help=f"V amplitude of qubit {q}")
    g.add_argument("--input", help="computational-basis input such as VV or HVH (comma-separated for several)")

    opts = argparse.ArgumentParser(add_help=False)
    g = opts.add_argument_group("Toffoli options")
    g.add_argument("--with-bs", dest="with_bs", action="store_true", default=True,
                   help="include the 50:50 beam splitter after PBS3 (default)")
    g.add_argument("--no-bs", dest="with_bs", action="store_false", help="leave the beam splitter out")
    g.add_argument("--recycle", action=argparse.BooleanOptionalAction, default=False,
                   help="recycle the photon leaving the second BS output (default: off)")
    g.add_argument("--feed-forward", dest="feed_forward", action=argparse.BooleanOptionalAction, default=True,
                   help="apply the detector-conditioned corrections (default: on)")

    out = argparse.ArgumentParser(add_help=False)
    g = out.add_argument_group("output")
    g.add_argument("--format", choices=("csv", "json", "text"), default=None)
    g.add_argument("--out", type=Path, help="write the artifact here instead of stdout")
    return coeffs, opts, out


def build_parser() -> argparse.ArgumentParser:
    coeffs, opts, out = _parents()
    p = argparse.ArgumentParser(prog="pgl", description="Exact simulator for post-selected linear-optical CPF and Toffoli gates.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("cpf-verify", parents=[coeffs, out], help="run the CPF gate and check P = 1/4 and unit fidelity")
    sub.add_parser("toffoli-verify", parents=[coeffs, opts, out], help="run the Toffoli gate per detector outcome")

    s = sub.add_parser("truth-table", parents=[opts, out], help="computational-basis truth table")
    s.add_argument("--gate", choices=("cpf", "toffoli"), default="cpf")
    s.add_argument("--circuit", type=Path, help="circuit JSON to use instead of the built-in gate")

    s = sub.add_parser("sweep", parents=[opts, out], help="alpha_2 sweep of success probability and fidelity")
    s.add_argument("--grid", default="-1:1:0.01", help="start:end:step (default -1:1:0.01)")
    s.add_argument("--seed", type=_int_arg, default=analysis.DEFAULT_SEED)
    s.add_argument("--draws", type=_int_arg, default=analysis.DEFAULT_DRAWS)

    s = sub.add_parser("trace", parents=[coeffs, opts, out], help="per-ket diff of a checkpoint against the analytic state")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--gate", choices=("cpf", "toffoli"), default="toffoli")
    s.add_argument("--record", default="", help="detector outcomes selecting the branch, e.g. D6=V,D12=H")

    s = sub.add_parser("oracle-check", parents=[out], help="compare the Fock evolution with the permanent formula")
    s.add_argument("--modes", type=_int_arg, default=3)
    s.add_argument("--photons", type=_int_arg, default=3)
    s.add_argument("--trials", type=_int_arg, default=200)
    s.add_argument("--seed", type=_int_arg, default=0)

    s = sub.add_parser("dump-circuit", parents=[opts, out], help="emit the circuit description as JSON")
    s.add_argument("--gate", choices=("cpf", "toffoli"), default="toffoli")
    s.add_argument("--circuit", type=Path, help="re-emit this circuit JSON in canonical form")
    return p


def _gate_options(args) -> GateOptions:
    try:
        return GateOptions(with_bs=args.with_bs, recycle=args.recycle, apply_feed_forward=args.feed_forward)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def resolve_inputs(args, n: int) -> list[tuple[str, list | None, np.ndarray]]:
    """(label, per-qubit coefficients, logical vector) for every requested input."""
    given = {k: getattr(args, k) for q in range(1, n + 1) for k in (f"alpha{q}", f"beta{q}")}
    extra = [f"--{k}" for q in range(n + 1, 4) for k in (f"alpha{q}", f"beta{q}") if getattr(args, k) is not None]
    if extra:
        raise UsageError(f"{' '.join(extra)} not used by a {n}-qubit gate")
    if args.input:
        if any(v is not None for v in given.values()):
            raise UsageError("--input cannot be combined with coefficient flags")
        out = []
        for lab in args.input.split(","):
            try:
                vec = parse_basis_label(lab)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            if vec.size != 2**n:
                raise UsageError(f"--input {lab!r} needs {n} letters")
            bits = basis_label(int(np.argmax(np.abs(vec))), n)
            out.append((bits, [(1.0, 0.0) if b == "H" else (0.0, 1.0) for b in bits], vec))
        return out
    if all(v is None for v in given.values()):
        out = [(basis_label(i, n), [(1.0, 0.0) if b == "H" else (0.0, 1.0) for b in basis_label(i, n)], np.eye(2**n)[i].astype(complex)) for i in range(2**n)]
        plus = [(1 / math.sqrt(2), 1 / math.sqrt(2))] * n
        return out + [("+" * n, plus, product_vector(plus))]
    coeffs = []
    for q in range(1, n + 1):
        a, b = given[f"alpha{q}"], given[f"beta{q}"]
        if a is None and b is None:
            a = b = 1 / math.sqrt(2)
        elif b is None:
            b = math.sqrt(max(0.0, 1 - abs(a) ** 2))
        elif a is None:
            a = math.sqrt(max(0.0, 1 - abs(b) ** 2))
        norm = abs(a) ** 2 + abs(b) ** 2
        if abs(norm - 1) > 1e-9:
            raise UsageError(f"qubit {q}: |alpha|^2 + |beta|^2 = {norm:.12g}, not 1")
        s = math.sqrt(norm)
        coeffs.append((complex(a) / s, complex(b) / s))
    return [("custom", coeffs, product_vector(coeffs))]


def _fmt(z: complex) -> str:
    re, im = round(complex(z).real, 6) + 0.0, round(complex(z).imag, 6) + 0.0
    return f"{re:+.6f}" if im == 0 else f"{re:+.6f}{im:+.6f}j"


def _click(rec) -> str:
    return {(1, 0): "H", (0, 1): "V"}.get(rec, str(rec))


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8", newline="\n")


def _json_number(x: float) -> float:
    return float(f"{x:.12g}")


# ------------------------------------------------------------------ commands


def _cpf_diagnostic(coeffs) -> str:
    branches = run(build_cpf_circuit(), encode_logical(product_vector(coeffs), "CPF"))
    refs = reference.cpf_states(coeffs)
    for label in build_cpf_circuit().checkpoint_labels:
        record = {"D3": (1, 0)} if label == "after-D3" else None
        state, _ = trace_checkpoint(branches, label, record)
        ref = refs["after-D3:H" if label == "after-D3" else label]
        dev = state.max_deviation(ref)
        if dev > TRACE_TOL:
            return f"first failing checkpoint: {label} (max amplitude deviation {dev:.3e})"
    return "first failing checkpoint: none (all checkpoints match; failure is in the output stage)"


def cmd_cpf_verify(args) -> int:
    circuit = build_cpf_circuit()
    ideal = ideal_gate("CPF")
    results = []
    ok = True
    lines = [f"{'input':8s} {'D3':3s} {'probability':>14s} {'fidelity':>14s} {'<in|out>':>18s}"]
    for label, coeffs, vec in resolve_inputs(args, 2):
        m = analysis.evaluate(circuit, vec, ideal)
        target = ideal @ vec
        rows = []
        for b in success_branches(m.branches):
            out = decode_output(b.state, circuit.output_labels)
            f = float(abs(np.vdot(target, out)))
            ph = complex(np.vdot(vec, out))
            rows.append({"D3": _click(b.detector_record["D3"]), "probability": b.probability, "fidelity": f, "overlap_in": ph})
            lines.append(f"{label:8s} {rows[-1]['D3']:3s} {b.probability:14.10f} {f:14.10f} {_fmt(ph):>18s}")
        passed = abs(m.probability - 0.25) <= CPF_TOL and m.fidelity >= 1 - CPF_TOL
        ok &= passed
        lines.append(f"{label:8s} {'sum':3s} {m.probability:14.10f} {m.fidelity:14.10f} {'PASS' if passed else 'FAIL':>18s}")
        results.append({"input": label, "probability": m.probability, "fidelity": m.fidelity, "pass": passed, "branches": rows,
                        "coeffs": coeffs})
        if not passed:
            lines.append(_cpf_diagnostic(coeffs))
    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": "cpf-verify", "pass": ok, "inputs": [
            {"input": r["input"], "probability": _json_number(r["probability"]), "fidelity": _json_number(r["fidelity"]),
             "pass": r["pass"], "branches": [
                {"D3": b["D3"], "probability": _json_number(b["probability"]), "fidelity": _json_number(b["fidelity"]),
                 "overlap_in": [_json_number(b["overlap_in"].real), _json_number(b["overlap_in"].imag)]}
                for b in r["branches"]]}
            for r in results]}
        _emit(dumps_canonical(doc), args.out)
    else:
        _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def cmd_toffoli_verify(args) -> int:
    opts = _gate_options(args)
    circuit = build_toffoli_circuit(opts)
    ideal = ideal_gate("TOFFOLI")
    p_curve, _ = analysis.quoted_curves(opts)
    ok = True
    lines = [f"options: {opts.tag()}",
             f"{'input':7s} {'try':>3s} {'D6':>3s} {'D12':>3s} {'probability':>14s} {'fidelity':>14s}  feed-forward (expected)"]
    docs = []
    for label, coeffs, vec in resolve_inputs(args, 3):
        m = analysis.evaluate(circuit, vec, ideal, apply_feed_forward=opts.apply_feed_forward)
        target = ideal @ vec
        target = target / np.linalg.norm(target)
        combos = []
        worst = 1.0
        for b in success_branches(m.branches):
            out = decode_output(b.state, circuit.output_labels)
            f = float(abs(np.vdot(target, out)))
            worst = min(worst, f)
            d6, d12 = _click(b.detector_record["D6"]), _click(b.detector_record["D12"])
            expected = [FEED_FORWARD_TABLE[("D6", d6)], FEED_FORWARD_TABLE[("D12", d12)]]
            expected = ", ".join(v.format(five="5'" if opts.with_bs else "5") for v in expected if v != "none") or "none"
            applied = ", ".join(b.feed_forward) or "none"
            combos.append({"attempt": b.attempt, "D6": d6, "D12": d12, "probability": b.probability, "fidelity": f,
                           "feed_forward": applied})
            lines.append(f"{label:7s} {b.attempt:3d} {d6:>3s} {d12:>3s} {b.probability:14.10f} {f:14.10f}  {applied} ({expected})")
        a2 = abs(coeffs[1][0])
        p_quoted = p_curve(a2)
        passed = worst >= 1 - TOFFOLI_TOL and abs(m.probability - p_quoted) <= TOFFOLI_TOL
        ok &= passed
        lines.append(f"{label:7s} total P = {m.probability:.10f} (quoted {p_quoted:.10f}), min fidelity {worst:.10f}  "
                     + ("PASS" if passed else "FAIL"))
        if not passed:
            report = analysis.checkpoint_report(opts, coeffs)
            lines.append(analysis.format_checkpoint_report(report, TRACE_TOL))
        docs.append({"input": label, "probability": _json_number(m.probability), "p_quoted": _json_number(p_quoted),
                     "min_fidelity": _json_number(worst), "pass": passed,
                     "combos": [{**c, "probability": _json_number(c["probability"]), "fidelity": _json_number(c["fidelity"])}
                                for c in combos]})
    if args.format == "json":
        _emit(dumps_canonical({"schema_version": SCHEMA_VERSION, "command": "toffoli-verify", "options": opts.tag(),
                               "pass": ok, "inputs": docs}), args.out)
    else:
        _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def _load_circuit(path: Path) -> Circuit:
    try:
        return Circuit.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load circuit {path}: {exc}") from None


def cmd_truth_table(args) -> int:
    if args.circuit:
        circuit = _load_circuit(args.circuit)
        kind = circuit.name
    else:
        kind = args.gate.upper()
        circuit = build_cpf_circuit(args.feed_forward) if kind == "CPF" else build_toffoli_circuit(_gate_options(args))
    table = analysis.truth_table(circuit, kind)
    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": "truth-table", "gate": kind, "labels": table.labels,
               "probability": [_json_number(v) for v in table.probability],
               "population": [[_json_number(v) for v in row] for row in table.population],
               "fidelity": [_json_number(v) for v in table.fidelity]}
        _emit(dumps_canonical(doc), args.out)
    else:
        _emit(table.format() + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    opts = _gate_options(args)
    try:
        grid = analysis.parse_grid(args.grid)
        table = analysis.sweep_alpha2(grid, opts, seed=args.seed, draws=args.draws)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "json":
        _emit(dumps_canonical(table.to_json()), args.out)
    else:
        _emit(table.to_csv(), args.out)
    return 0


def _parse_record(text: str) -> dict:
    rec = {}
    for part in filter(None, (t.strip() for t in text.split(","))):
        name, _, val = part.partition("=")
        val = val.strip().upper()
        if val in ("H", "V"):
            rec[name.strip()] = (1, 0) if val == "H" else (0, 1)
        elif val.isdigit():
            rec[name.strip()] = int(val)
        else:
            raise UsageError(f"bad detector outcome {part!r}; use NAME=H, NAME=V or NAME=<count>")
    return rec


def cmd_trace(args) -> int:
    kind = args.gate.upper()
    n = n_qubits(kind)
    opts = _gate_options(args)
    circuit = build_cpf_circuit() if kind == "CPF" else build_toffoli_circuit(opts)
    if args.checkpoint not in circuit.checkpoint_labels:
        raise UsageError(f"unknown checkpoint {args.checkpoint!r}; choose from {', '.join(circuit.checkpoint_labels)}")
    inputs = resolve_inputs(args, n)
    if len(inputs) != 1:
        plus = [(1 / math.sqrt(2), 1 / math.sqrt(2))] * n
        inputs = [("+" * n, plus, product_vector(plus))]
    label, coeffs, vec = inputs[0]
    record = _parse_record(args.record)
    if not record:
        record = {"D3": (1, 0)} if kind == "CPF" else {"D6": (1, 0), "D12": (0, 1)}
    branches = run(circuit, encode_logical(vec, kind), apply_feed_forward=opts.apply_feed_forward)
    try:
        state, p = trace_checkpoint(branches, args.checkpoint, record)
    except KeyError:
        # checkpoints before a detector exist in every branch of that detector
        state, p = trace_checkpoint(branches, args.checkpoint, {k: v for k, v in record.items() if k in ("D6", "D3")} or None)
    if kind == "CPF":
        refs = reference.cpf_states(coeffs)
        key = args.checkpoint if args.checkpoint != "after-D3" else "after-D3:H"
        ref = refs[key]
    else:
        refs = reference.toffoli_states(coeffs, with_bs=opts.with_bs)
        if args.checkpoint not in refs:
            raise UsageError(f"no analytic state recorded for checkpoint {args.checkpoint!r}")
        ref = refs[args.checkpoint]
    diff = state.diff(ref, atol=-1.0)  # every ket, matching or not
    dev = state.max_deviation(ref)
    rows = sorted(diff, key=lambda r: r[0])
    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": "trace", "gate": kind, "checkpoint": args.checkpoint,
               "record": {k: list(v) if isinstance(v, tuple) else v for k, v in record.items()},
               "probability": _json_number(p), "max_deviation": _json_number(dev),
               "terms": [{"ket": repr(k), "simulated": [_json_number(a.real), _json_number(a.imag)],
                          "analytic": [_json_number(b.real), _json_number(b.imag)]} for k, a, b in rows]}
        text = dumps_canonical(doc)
    else:
        lines = [f"checkpoint {args.checkpoint} ({kind}, input {label}), probability {p:.10f}",
                 f"{'ket':48s} {'simulated':>20s} {'analytic':>20s} {'|diff|':>10s}"]
        for k, a, b in rows:
            flag = "  *" if abs(a - b) > TRACE_TOL else ""
            lines.append(f"{repr(k):48s} {_fmt(a):>20s} {_fmt(b):>20s} {abs(a - b):10.2e}{flag}")
        lines.append(f"max amplitude deviation {dev:.3e}")
        if dev > TRACE_TOL:
            lines.append(f"first failing checkpoint: {_first_failing(kind, circuit, branches, record, coeffs, opts)}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if dev <= TRACE_TOL else 1


def _first_failing(kind, circuit, branches, record, coeffs, opts) -> str:
    refs = reference.cpf_states(coeffs) if kind == "CPF" else reference.toffoli_states(coeffs, with_bs=opts.with_bs)
    for label in circuit.checkpoint_labels:
        key = "after-D3:H" if label == "after-D3" else label
        if key not in refs:
            continue
        try:
            state, _ = trace_checkpoint(branches, label, record)
        except KeyError:
            continue
        if state.max_deviation(refs[key]) > TRACE_TOL:
            return label
    return "none"


def cmd_oracle_check(args) -> int:
    try:
        rep = oracle_check(args.modes, args.photons, args.trials, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ok = rep.max_deviation < ORACLE_TOL
    if args.format == "json":
        _emit(dumps_canonical({"schema_version": SCHEMA_VERSION, "command": "oracle-check", "modes": rep.modes,
                               "photons": rep.photons, "trials": rep.trials, "comparisons": rep.comparisons,
                               "max_deviation": rep.max_deviation, "pass": ok}), args.out)
    else:
        _emit(f"modes={rep.modes} photons={rep.photons} trials={rep.trials} comparisons={rep.comparisons} "
              f"max amplitude deviation {rep.max_deviation:.3e} {'PASS' if ok else 'FAIL'}\n", args.out)
    return 0 if ok else 1


def cmd_dump_circuit(args) -> int:
    if args.format == "csv":
        raise UsageError("dump-circuit only emits JSON")
    if args.circuit:
        circuit = _load_circuit(args.circuit)
    elif args.gate == "cpf":
        circuit = build_cpf_circuit(args.feed_forward)
    else:
        circuit = build_toffoli_circuit(_gate_options(args))
    _emit(circuit.dumps(), args.out)
    return 0


COMMANDS = {
    "cpf-verify": cmd_cpf_verify,
    "toffoli-verify": cmd_toffoli_verify,
    "truth-table": cmd_truth_table,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
    "oracle-check": cmd_oracle_check,
    "dump-circuit": cmd_dump_circuit,
}


_VALUE_FLAGS = {"--grid"} | {f"--{k}{q}" for k in ("alpha", "beta") for q in (1, 2, 3)}


def _join_values(argv: Sequence[str]) -> list[str]:
    """Glue values such as ``-1:1:0.01`` or ``-sqrt(1/2)`` to their flag so argparse does not read them as options."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_values(sys.argv[1:] if argv is None else argv))
    if args.format == "csv" and args.command not in ("sweep", "dump-circuit"):
        parser.error(f"{args.command} has no CSV output; use --format json or text")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except FockError as exc:
        print(f"pgl: error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
