"""Command line interface.

Exit codes: 0 success, 1 failed verification, 2 bad input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .circuit import BasisState, CircuitError, gate_count, parse_program
from .channels import ChannelError, parse_noise_model
from .bench import BENCH_KINDS, gen_bench
from .diamond import SolverError, worst_case_bound
from .densesim import DenseSimError, exact_error
from .logic import (
    analyze,
    check,
    compare_models,
    derivation_from_json,
    derivation_to_json,
)

DEFAULT_WIDTH = 128


class CliError(Exception):
    pass


def _load_program(path):
    try:
        with open(path) as fh:
            return parse_program(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read circuit {path}: {exc.strerror}") from None
    except CircuitError as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_noise(path):
    try:
        with open(path) as fh:
            return parse_noise_model(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read noise model {path}: {exc.strerror}") from None
    except (CircuitError, ChannelError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _input_state(arg, nqubits):
    if arg is None:
        return BasisState((0,) * nqubits)
    try:
        state = BasisState.from_string(arg)
    except (CircuitError, ValueError) as exc:
        raise CliError(f"bad input state {arg!r}: {exc}") from None
    if len(state) != nqubits:
        raise CliError(f"input state has {len(state)} bits, circuit has {nqubits} qubits")
    return state


def _width(args, nqubits):
    w = args.mps_width if args.mps_width is not None else DEFAULT_WIDTH
    if w < 1:
        raise CliError("--mps-width must be positive")
    return min(w, 2 ** (nqubits // 2))


def _report_json(report, derivation_path=None):
    out = {
        "epsilon": report.epsilon,
        "delta": report.delta,
        "worst_case": report.worst_case,
        "gate_count": report.gate_count,
        "per_gate": report.per_gate,
        "flags": report.flags,
        "wall_ms": report.timings["wall_ms"],
        "tn_ms": report.timings["tn_ms"],
        "sdp_ms": report.timings["sdp_ms"],
        "logic_ms": report.timings["logic_ms"],
    }
    if derivation_path is not None:
        out["derivation_path"] = derivation_path
    return out


def _cmd_analyze(args):
    program = _load_program(args.circuit)
    model = _load_noise(args.noise)
    state = _input_state(args.input, program.nqubits)
    width = _width(args, program.nqubits)
    report = analyze(program, state, model, width, branch_cap=args.branch_cap)
    path = None
    if args.emit_derivation:
        path = args.emit_derivation
        with open(path, "w") as fh:
            fh.write(derivation_to_json(report))
    if args.json:
        print(json.dumps(_report_json(report, path), indent=2))
    else:
        print(f"epsilon     {report.epsilon:.6e}")
        print(f"delta       {report.delta:.6e}")
        print(f"worst case  {report.worst_case:.6e}")
        print(f"gates       {report.gate_count}")
        for flag in report.flags:
            print(f"note: {flag}")
        if path:
            print(f"derivation  {path}")
    return 0


def _cmd_worst_case(args):
    program = _load_program(args.circuit)
    model = _load_noise(args.noise)
    t0 = time.perf_counter()
    wc = worst_case_bound(program, model)
    if args.json:
        print(json.dumps({
            "worst_case": wc,
            "gate_count": gate_count(program),
            "wall_ms": 1000 * (time.perf_counter() - t0),
        }, indent=2))
    else:
        print(f"worst case  {wc:.6e}")
    return 0


def _cmd_compare(args):
    program = _load_program(args.circuit)
    models = [(path, _load_noise(path)) for path in args.noise]
    state = _input_state(args.input, program.nqubits)
    width = _width(args, program.nqubits)
    ranked = compare_models(program, state, models, width, branch_cap=args.branch_cap)
    if args.json:
        print(json.dumps({
            "ranking": [
                {"model": name, **_report_json(rep)} for name, rep in ranked
            ]
        }, indent=2))
    else:
        for i, (name, rep) in enumerate(ranked, start=1):
            print(f"{i}. {name}  epsilon {rep.epsilon:.6e}  delta {rep.delta:.6e}")
    return 0


def _cmd_oracle(args):
    program = _load_program(args.circuit)
    model = _load_noise(args.noise)
    state = _input_state(args.input, program.nqubits)
    try:
        err = exact_error(program, state, model)
    except DenseSimError as exc:
        raise CliError(str(exc)) from None
    if args.json:
        print(json.dumps({"exact_error": err}, indent=2))
    else:
        print(f"exact error {err:.6e}")
    return 0


def _cmd_check(args):
    program = _load_program(args.circuit)
    model = _load_noise(args.noise)
    try:
        with open(args.derivation) as fh:
            deriv = derivation_from_json(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read derivation {args.derivation}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise CliError(f"{args.derivation}: {exc}") from None
    ok, reason = check(deriv, program, model)
    if args.json:
        print(json.dumps({"valid": ok, "reason": reason}, indent=2))
    else:
        print("valid" if ok else f"INVALID: {reason}")
    return 0 if ok else 1


def _cmd_gen_bench(args):
    try:
        text = gen_bench(args.kind, args.qubits, args.layers, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({gate_count(parse_program(text))} gates)")
    else:
        sys.stdout.write(text)
    return 0


def _add_common(sub, noise_multi=False):
    sub.add_argument("--circuit", required=True, help="path to a .qc circuit file")
    if noise_multi:
        sub.add_argument("--noise", required=True, nargs="+",
                         help="paths to .nm noise model files")
    else:
        sub.add_argument("--noise", required=True, help="path to a .nm noise model file")
    sub.add_argument("--json", action="store_true", help="emit a JSON report")


def _add_analysis_args(sub):
    sub.add_argument("--input", help="basis input state as a bit string (default all zeros)")
    sub.add_argument("-w", "--mps-width", type=int, default=None,
                     help=f"MPS bond width cap (default {DEFAULT_WIDTH}, auto-capped)")
    sub.add_argument("--branch-cap", type=int, default=64,
                     help="max measurement branches to enumerate")
    sub.add_argument("--seed", type=int, default=0, help="seed for randomized helpers")


def build_parser():
    ap = argparse.ArgumentParser(prog="qerr",
                                 description="Certified error bounds for noisy quantum circuits")
    sp = ap.add_subparsers(dest="command", required=True)

    s = sp.add_parser("analyze", help="bound the output error of a noisy circuit")
    _add_common(s)
    _add_analysis_args(s)
    s.add_argument("--emit-derivation", metavar="PATH",
                   help="write the checkable derivation as JSON")
    s.set_defaults(func=_cmd_analyze)

    s = sp.add_parser("worst-case", help="input-independent per-gate error sum")
    _add_common(s)
    s.set_defaults(func=_cmd_worst_case)

    s = sp.add_parser("compare", help="rank several noise models on one circuit")
    _add_common(s, noise_multi=True)
    _add_analysis_args(s)
    s.set_defaults(func=_cmd_compare)

    s = sp.add_parser("oracle", help="exact dense-simulator error (small circuits)")
    _add_common(s)
    s.add_argument("--input", help="basis input state as a bit string")
    s.set_defaults(func=_cmd_oracle)

    s = sp.add_parser("check", help="verify a previously emitted derivation")
    s.add_argument("--circuit", required=True)
    s.add_argument("--noise", required=True)
    s.add_argument("--derivation", required=True, help="path to a .deriv file")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_check)

    s = sp.add_parser("gen-bench", help="generate a benchmark circuit")
    s.add_argument("--kind", required=True, choices=BENCH_KINDS)
    s.add_argument("--qubits", type=int, required=True)
    s.add_argument("--layers", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="output path (stdout if omitted)")
    s.set_defaults(func=_cmd_gen_bench)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CircuitError, ChannelError, DenseSimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
