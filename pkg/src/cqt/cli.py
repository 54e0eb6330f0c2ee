"""Command-line entry point (``cqt``).

Exit codes: 0 success, 2 parse or usage error, 3 protocol failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from contextlib import redirect_stderr, redirect_stdout
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CQTError, ProtocolAbort, StructuralError
from .hilbert import InputQubit, fidelity
from .protocols import (
    BellKind,
    Injection,
    ProtocolParams,
    bell_state,
    discriminate_bell,
    prepare_bell,
    teleport,
)

EXIT_OK, EXIT_USAGE, EXIT_PROTOCOL = 0, 2, 3

TRIAL_COLUMNS = ["trial", "injection", "outcome1", "outcome2", "probe_prob", "fidelity"]
SWEEP_COLUMNS = ["point", "variable", "value", "trials", "probe_prob", "success_rate", "min_fidelity"]
SWEEP_VARIABLES = {"alpha": "alpha", "n_max": "n_max", "nmax": "n_max", "gt": "gt_probe", "gt_probe": "gt_probe"}


class UsageFailure(Exception):
    pass


@dataclass
class SweepSpec:
    variable: str
    values: list[float]
    trials: int
    seed: int

    def __post_init__(self):
        if not self.values:
            raise UsageFailure("sweep has no values")
        if self.trials < 1:
            raise UsageFailure("trials must be >= 1")

    @classmethod
    def parse(cls, text: str, trials: int, seed: int) -> "SweepSpec":
        """``var=start:stop:step`` (stop inclusive) or ``var=v1,v2,...``."""
        if "=" not in text:
            raise UsageFailure(f"sweep spec {text!r} must look like var=start:stop:step")
        name, rhs = (p.strip() for p in text.split("=", 1))
        if name not in SWEEP_VARIABLES:
            raise UsageFailure(f"cannot sweep {name!r}; choose from alpha, n_max, gt_probe")
        try:
            if ":" in rhs:
                start, stop, step = (float(x) for x in rhs.split(":"))
                if step <= 0:
                    raise UsageFailure("sweep step must be positive")
                count = int(math.floor((stop - start) / step + 1e-9)) + 1
                values = [round(start + i * step, 12) for i in range(max(count, 0))]
            else:
                values = [float(x) for x in rhs.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageFailure(f"bad sweep spec {text!r}: {exc}") from None
        return cls(SWEEP_VARIABLES[name], values, trials, seed)


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=2.0, help="cavity amplitude (default 2.0)")
    common.add_argument("--nmax", type=int, default=64, help="photon-number cutoff (default 64)")
    common.add_argument("--gt", type=float, default=None, help="probe pulse area (default pi/(4 alpha))")
    common.add_argument("--seed", type=int, default=0, help="RNG seed; CQT_SEED overrides it")
    common.add_argument("--trials", type=int, default=1)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="cqt", description="Cavity-QED Bell states and atomic teleportation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="execute a .cqp script")
    p.add_argument("file", type=Path)
    p.add_argument("-p", "--param", action="append", default=[], metavar="NAME=VALUE",
                   help="bind ${NAME}; alpha is bound from --alpha unless given here")

    p = sub.add_parser("bell", parents=[common], help="prepare a Bell state")
    p.add_argument("--kind", required=True, type=BellKind.parse)

    p = sub.add_parser("discriminate", parents=[common], help="prepare then discriminate a Bell state")
    p.add_argument("--kind", required=True, type=BellKind.parse)
    p.add_argument("--inject", default=None, type=Injection.parse,
                   help="plus or minus (default: the injection matched to --kind)")

    p = sub.add_parser("teleport", parents=[common], help="teleport zeta|f> + xi|g>")
    p.add_argument("--zeta", required=True, type=_complex)
    p.add_argument("--xi", required=True, type=_complex)
    p.add_argument("--inject", default=Injection.MINUS, type=Injection.parse)

    p = sub.add_parser("sweep", parents=[common], help="teleportation statistics over a parameter grid")
    p.add_argument("--spec", required=True, help="var=start:stop:step or var=v1,v2,...")

    sub.add_parser("selftest", parents=[common], help="compare the fast path against the oracle")
    return parser


def _params(args, **override) -> ProtocolParams:
    kw = dict(alpha=args.alpha, n_max=args.nmax, gt_probe=args.gt, seed=args.seed)
    kw.update(override)
    try:
        return ProtocolParams(**kw)
    except StructuralError as exc:
        raise UsageFailure(str(exc)) from None


def _rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([seed, *path])


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()


def _teleport_row(trial: int, rec) -> dict:
    return {
        "trial": trial,
        "success": rec.success,
        "injection": str(rec.message.injection) if rec.message else None,
        "outcome1": rec.message.outcome1 if rec.message else None,
        "outcome2": rec.message.outcome2 if rec.message else None,
        "probe_prob": rec.probe_probability,
        "bell_branch_probability": rec.bell_branch_probability,
        "fidelity": rec.fidelity,
        "bob_gate": rec.bob_gate,
        "source_level": rec.source_level,
        "source_in_basis_state": rec.source_in_basis_state,
    }


def cmd_bell(args):
    params = _params(args)
    state, p = prepare_bell(params, args.kind)
    f = fidelity(state, bell_state(args.kind))
    row = {
        "trial": 0,
        "injection": str(args.kind.preparation_injection),
        "outcome1": None,
        "outcome2": None,
        "probe_prob": p,
        "fidelity": f,
    }
    payload = {
        "command": "bell",
        "kind": args.kind.value,
        "params": params.as_dict(),
        "success_prob": p,
        "fidelity": f,
        "probabilities": {"probe": p},
        "fidelities": {"bell": f},
        "amplitudes": {lv: _cplx(state.amp[i]) for i, lv in enumerate(("ff", "fg", "gf", "gg"))},
        "records": [row],
    }
    return payload, [row], TRIAL_COLUMNS, EXIT_OK


def cmd_discriminate(args):
    params = _params(args)
    injection = args.inject or args.kind.discrimination_injection
    state, _ = prepare_bell(params, args.kind)
    rows = []
    for t in range(args.trials):
        d = discriminate_bell(state, params, injection, _rng(args.seed, t))
        rows.append({
            "trial": t,
            "injection": str(injection),
            "outcome1": d.outcomes[0],
            "outcome2": d.outcomes[1],
            "inferred": d.inferred.value,
            "correct": d.inferred is args.kind,
            "probe_prob": d.probe_probability,
            "fidelity": None,
        })
    payload = {
        "command": "discriminate",
        "kind": args.kind.value,
        "injection": str(injection),
        "params": params.as_dict(),
        "probe_probability": rows[0]["probe_prob"],
        "correct_fraction": sum(r["correct"] for r in rows) / len(rows),
        "probabilities": {"probe": rows[0]["probe_prob"]},
        "fidelities": {},
        "records": rows,
    }
    return payload, rows, TRIAL_COLUMNS, EXIT_OK


def cmd_teleport(args):
    params = _params(args)
    z, x = args.zeta, args.xi
    nrm = math.sqrt(abs(z) ** 2 + abs(x) ** 2)
    if nrm == 0:
        raise UsageFailure("zeta and xi cannot both be zero")
    qubit = InputQubit(z / nrm, x / nrm)
    rows = [
        _teleport_row(t, teleport(qubit, params, args.inject, _rng(args.seed, t)))
        for t in range(args.trials)
    ]
    for r in rows:
        r["injection"] = str(args.inject)
    ok = [r for r in rows if r["success"]]
    payload = {
        "command": "teleport",
        "params": params.as_dict(),
        "input": {"zeta": _cplx(qubit.zeta), "xi": _cplx(qubit.xi)},
        "injection": str(args.inject),
        "summary": {
            "trials": len(rows),
            "successes": len(ok),
            "success_rate": len(ok) / len(rows),
            "probe_probability": rows[0]["probe_prob"],
            "min_fidelity": min((r["fidelity"] for r in ok), default=None),
        },
        "probabilities": {"probe": rows[0]["probe_prob"]},
        "fidelities": [r["fidelity"] for r in rows],
        "records": rows,
    }
    code = EXIT_PROTOCOL if args.trials == 1 and not ok else EXIT_OK
    return payload, rows, TRIAL_COLUMNS, code


def cmd_sweep(args):
    spec = SweepSpec.parse(args.spec, args.trials, args.seed)
    points = []
    for i, value in enumerate(spec.values):
        value = int(value) if spec.variable == "n_max" else value
        params = _params(args, **{spec.variable: value})
        rng_inputs = _rng(spec.seed, i, 0)
        recs = []
        for t in range(spec.trials):
            qubit = InputQubit.haar_random(rng_inputs)
            injection = Injection.MINUS if t % 2 == 0 else Injection.PLUS
            recs.append(teleport(qubit, params, injection, _rng(spec.seed, i, t + 1)))
        ok = [r for r in recs if r.success]
        points.append({
            "point": i,
            "variable": spec.variable,
            "value": value,
            "trials": spec.trials,
            "probe_prob": recs[0].probe_probability,
            "success_rate": len(ok) / len(recs),
            "min_fidelity": min((r.fidelity for r in ok), default=None),
            "params": params.as_dict(),
        })
    payload = {
        "command": "sweep",
        "params": _params(args).as_dict(),
        "sweep": {"variable": spec.variable, "values": spec.values, "trials": spec.trials, "seed": spec.seed},
        "probabilities": [p["probe_prob"] for p in points],
        "fidelities": [p["min_fidelity"] for p in points],
        "records": points,
    }
    return payload, points, SWEEP_COLUMNS, EXIT_OK


def cmd_run(args):
    from .script.ast import Correct, evaluate
    from .script import ScriptError, execute_script, parse_script, script_params

    try:
        text = args.file.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageFailure(f"cannot read {args.file}: {exc}") from None
    bindings = {"alpha": args.alpha}
    for item in args.param:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageFailure(f"--param expects NAME=VALUE, got {item!r}")
        try:
            bindings[name.strip()] = float(value)
        except ValueError:
            raise UsageFailure(f"--param {name}: not a number: {value!r}") from None
    try:
        script = parse_script(text)
    except ScriptError as exc:
        raise UsageFailure(f"{args.file}:{exc}") from None
    missing = sorted(script_params(script) - set(bindings))
    if missing:
        raise UsageFailure(f"{args.file}: unbound parameters {', '.join(missing)}; pass them with --param NAME=VALUE")
    try:
        report = execute_script(script, bindings, seed=args.seed, n_max=args.nmax)
    except ScriptError as exc:
        raise ProtocolAbort(f"{args.file}:{exc}") from exc
    measured = [v for k, v in report.measured.items() if "." not in k]
    injection = None
    for stmt in script.operations:
        if isinstance(stmt, Correct):
            injection = "plus" if evaluate(stmt.injected, bindings) > 0 else "minus"
    row = {
        "trial": 0,
        "injection": injection,
        "outcome1": measured[0] if measured else None,
        "outcome2": measured[1] if len(measured) > 1 else None,
        "probe_prob": report.postselect_probability,
        "fidelity": report.fidelities[-1]["value"] if report.fidelities else None,
    }
    payload = {"command": "run", "file": str(args.file), "params": bindings, **report.to_dict(), "records": [row]}
    return payload, [row], TRIAL_COLUMNS, EXIT_OK if report.ok else EXIT_PROTOCOL


def cmd_selftest(args):
    from .testing.oracle import oracle_checks

    rows = [
        {"check": name, "passed": passed, "detail": detail}
        for name, passed, detail in oracle_checks(seed=args.seed)
    ]
    payload = {
        "command": "selftest",
        "params": {"seed": args.seed},
        "probabilities": {},
        "fidelities": {},
        "records": rows,
        "passed": all(r["passed"] for r in rows),
    }
    return payload, rows, ["check", "passed", "detail"], EXIT_OK if payload["passed"] else EXIT_PROTOCOL


COMMANDS = {
    "run": cmd_run,
    "bell": cmd_bell,
    "discriminate": cmd_discriminate,
    "teleport": cmd_teleport,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def run_command(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with redirect_stdout(stdout), redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    env_seed = os.environ.get("CQT_SEED")
    if env_seed is not None:
        try:
            args.seed = int(env_seed)
        except ValueError:
            print(f"cqt: CQT_SEED must be an integer, got {env_seed!r}", file=stderr)
            return EXIT_USAGE
    if args.trials < 1:
        print("cqt: --trials must be >= 1", file=stderr)
        return EXIT_USAGE
    try:
        payload, rows, columns, code = COMMANDS[args.command](args)
    except UsageFailure as exc:
        print(f"cqt: {exc}", file=stderr)
        return EXIT_USAGE
    except (ProtocolAbort, CQTError) as exc:
        print(f"cqt: protocol failure: {exc}", file=stderr)
        return EXIT_PROTOCOL
    if args.format == "json":
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        text = _csv(rows, columns)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
