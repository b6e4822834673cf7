"""Command-line front end (``l2ext``).

Exit codes: 0 all checks pass, 1 usage or numeric error, 2 certification
failure, 3 a CRITICAL model verdict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, replace
from typing import Sequence

import numpy as np

from . import bergman, certify, constants
from . import denomcore as dc
from .denomcore import DenominatorSpec
from .exprlang import ExprError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNCERTIFIED = 2
EXIT_CRITICAL = 3

AUTO_DELTAS = (0.25, 0.5, 1.0, math.sqrt(2.0), 2.0, 4.0)
DEFAULT_CERT_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- option decoding


def _params(items: Sequence[str] | None) -> dict[str, float]:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"--param expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {name}: {value!r} is not a number") from None
    return out


def spec_from_args(args) -> DenominatorSpec:
    if args.g and args.family:
        raise UsageError("give either --family or --g, not both")
    if args.g:
        return DenominatorSpec.from_expr(args.g, _params(args.param))
    family = args.family or "fn2"
    if family == "fn2":
        return DenominatorSpec.fn2()
    s = 0.5 if args.s is None else args.s
    if family == "fn1":
        return DenominatorSpec.fn1(s)
    if family == "fn3":
        return DenominatorSpec.fn3(s)
    return DenominatorSpec.fn4(s, 3 if args.N is None else args.N)


def r_model(text: str | None) -> certify.RModel:
    if text is None or text == "zero":
        return certify.RModel.zero()
    kind, _, value = text.partition(":")
    if kind == "const":
        try:
            return certify.RModel.const(float(value))
        except ValueError:
            raise UsageError(f"--R const:<value> needs a number, got {value!r}") from None
    if kind == "radial":
        try:
            data = np.loadtxt(value, delimiter=",", ndmin=2)
        except OSError as exc:
            raise UsageError(f"cannot read radial R file: {exc}") from None
        if data.shape[1] != 2:
            raise UsageError("radial R file must have two columns: |w|, R")
        return certify.RModel.radial_samples(data[:, 0], data[:, 1], label=value)
    raise UsageError(f"--R must be zero, const:<v> or radial:<file>, got {text!r}")


def _numbers(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def disk_weight(args) -> certify.WeightModel:
    """``--kappa``: ``0``, ``r2`` (kappa = |w|^2) or coefficients ``c0,c1,...`` of a polynomial in |w|^2."""
    text = args.kappa or "0"
    if text == "0":
        kappa = ()
    elif text == "r2":
        kappa = (0.0, 1.0)
    else:
        kappa = _numbers(text)
    return certify.WeightModel.disk(kappa, R=r_model(args.R))


def bidisk_weight(args) -> certify.WeightModel:
    """``--kappa a,b,c``: kappa = a|z|^2 + b|w|^2 + c Re(z conj w); ``0`` and ``r2`` mean 0,0,0 and 1,1,0."""
    text = args.kappa or "0"
    if text == "0":
        a = b = c = 0.0
    elif text == "r2":
        a, b, c = 1.0, 1.0, 0.0
    else:
        vals = _numbers(text)
        if len(vals) != 3:
            raise UsageError("bidisk --kappa needs a,b,c")
        a, b, c = vals
    return certify.WeightModel.bidisk(a, b, c, R=r_model(args.R))


def delta_grid(args, spec: DenominatorSpec) -> list[float]:
    if args.delta is None or args.delta == "auto":
        grid = list(AUTO_DELTAS)
        best, _ = constants.optimal_delta(spec, constants.GENERIC)
        if all(abs(best - d) > 1e-9 * d for d in grid):
            grid.append(best)
        return sorted(grid)
    try:
        d = float(args.delta)
    except ValueError:
        raise UsageError(f"--delta must be a number or 'auto', got {args.delta!r}") from None
    if not d > 0:
        raise UsageError("--delta must be positive")
    return [d]


def single_delta(args, spec: DenominatorSpec) -> float:
    if args.delta is None or args.delta == "auto":
        return constants.optimal_delta(spec, constants.GENERIC)[0]
    return delta_grid(args, spec)[0]


# --------------------------------------------------------------------------- output


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def _clean(o):
    if isinstance(o, float):
        return o if math.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, default=_json_default) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------- subcommands


def cmd_check_class(args) -> int:
    spec = spec_from_args(args)
    weight = disk_weight(args) if (args.R or args.kappa) else None
    ti = dc.tail_integral(spec)
    deltas = delta_grid(args, spec) if ti.finite else []
    gammas = (args.gamma,) if args.gamma else certify.DEFAULT_GAMMAS
    epss = (args.eps,) if args.eps else certify.DEFAULT_EPSILONS
    berg = certify.check_berg(spec, weight, gammas, epss, args.grid or 32) if weight and ti.finite else None
    result = certify.check_class_d(spec, deltas, None)
    certs = [replace(c, berg=berg) for c in result.certificates]
    tol = args.tol or DEFAULT_CERT_TOL
    best = min((c for c in certs if c.finite), key=lambda c: c.bound, default=None)
    passed = (result.passed and best is not None and all(best.h_conditions)
              and best.ode_max_residual <= tol and (berg is None or berg.passed))
    if args.format == "json":
        text = _dump_json({
            "spec": spec.spec_id,
            "pass": passed,
            "failed_condition": result.failed_condition,
            "reason": result.reason,
            "best": best.to_json() if best else None,
            "certificates": [c.to_json() for c in certs],
        })
    else:
        rows = [(c.delta, c.C, c.K, c.witness_x, c.bound, c.ode_max_residual, *c.h_conditions,
                 None if c.berg is None else c.berg.passed) for c in certs]
        text = _csv(("delta", "C", "K", "witness_x", "bound", "ode_max_residual", "h_a", "h_b", "h_c", "berg"), rows)
    _emit(args, text)
    if not passed:
        reason = result.reason or (berg.detail if berg and not berg.passed else "certificate conditions failed")
        print(f"{spec.spec_id}: not certified: {reason}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_twist_table(args) -> int:
    spec = dc.normalize(spec_from_args(args))
    delta = single_delta(args, spec)
    xs = np.geomspace(1.0, args.xmax, args.grid or 200)
    smp = dc.h_delta_samples(spec, delta, xs)
    if args.format == "json":
        _emit(args, _dump_json({"spec": spec.spec_id, "delta": delta,
                                "rows": [dict(zip(("x", "G", "h", "hp", "hpp"), r)) for r in smp.rows()]}))
    else:
        _emit(args, smp.to_csv())
    return EXIT_OK


def cmd_constant(args) -> int:
    spec = spec_from_args(args)
    delta = single_delta(args, dc.normalize(spec))
    eb = constants.extension_bound(spec, delta)
    if args.format == "json":
        _emit(args, _dump_json(eb.to_json()))
    else:
        d = eb.to_json()
        _emit(args, _csv(tuple(d), [tuple(d.values())]))
    return EXIT_OK if math.isfinite(eb.generic_bound) else EXIT_UNCERTIFIED


def cmd_optimize_delta(args) -> int:
    spec = spec_from_args(args)
    objectives = [constants.GENERIC] + ([constants.AS_PRINTED] if spec.builtin else [])
    rows = []
    for obj in objectives:
        d, v = constants.optimal_delta(spec, obj)
        rows.append((spec.spec_id, obj, d, v))
    if args.format == "json":
        _emit(args, _dump_json([dict(zip(("spec", "objective", "delta", "value"), r)) for r in rows]))
    else:
        _emit(args, _csv(("spec", "objective", "delta", "value"), rows))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    report = constants.reproduce_report()
    _emit(args, report.to_json() + "\n" if args.format == "json" else report.to_csv())
    return EXIT_OK


def _verdict_exit(verdicts) -> int:
    flags = {v.flag for v in verdicts}
    if bergman.CRITICAL in flags:
        return EXIT_CRITICAL
    if bergman.UNCERTIFIED in flags:
        return EXIT_UNCERTIFIED
    return EXIT_OK


def _emit_verdicts(args, verdicts) -> None:
    if args.format == "json":
        _emit(args, _dump_json([asdict(v) for v in verdicts]))
    else:
        _emit(args, bergman.verdicts_to_csv(verdicts))


def _normalized(args) -> DenominatorSpec:
    return dc.normalize(spec_from_args(args))


def cmd_verify_disk(args) -> int:
    spec = _normalized(args)
    weight = disk_weight(args)
    delta = single_delta(args, spec)
    v = bergman.disk_min_extension(spec, weight, delta)
    _emit_verdicts(args, [v])
    return _verdict_exit([v])


def cmd_verify_bidisk(args) -> int:
    spec = _normalized(args)
    weight = bidisk_weight(args)
    delta = single_delta(args, spec)
    f = _numbers(args.f)
    v = bergman.bidisk_min_extension(spec, weight, f, args.degree, delta)
    _emit_verdicts(args, [v])
    return _verdict_exit([v])


SWEEP_SPECS = (
    DenominatorSpec.fn1(0.5),
    DenominatorSpec.fn1(1.0),
    DenominatorSpec.fn2(),
    DenominatorSpec.fn3(0.1),
    DenominatorSpec.fn3(0.5),
    DenominatorSpec.fn4(0.5, 3),
)
SWEEP_F = ((1.0,), (0.0, 1.0), (3.0, 0.0, 2.0))


def cmd_sweep(args) -> int:
    specs = [_normalized(args)] if (args.family or args.g) else list(SWEEP_SPECS)
    top = args.degree
    degrees = sorted({d for d in (2, 4, 6) if d <= top} | {top})
    verdicts = bergman.sweep_verify(specs, bergman.DEFAULT_DISK_WEIGHTS + bergman.DEFAULT_BIDISK_WEIGHTS,
                                    SWEEP_F, degrees, jobs=args.jobs)
    _emit_verdicts(args, verdicts)
    return _verdict_exit(verdicts)


COMMANDS = {
    "check-class": (cmd_check_class, "certify class membership of g"),
    "twist-table": (cmd_twist_table, "tabulate G, h, h', h'' on [1, xmax]"),
    "constant": (cmd_constant, "extension constant at one delta"),
    "optimize-delta": (cmd_optimize_delta, "minimise the constant over delta"),
    "reproduce": (cmd_reproduce, "table of the built-in family constants"),
    "verify-disk": (cmd_verify_disk, "minimal extension ratio on the disk"),
    "verify-bidisk": (cmd_verify_bidisk, "minimal extension ratio on the bidisk"),
    "sweep": (cmd_sweep, "verify many spec/weight/f/degree cases"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", choices=("fn1", "fn2", "fn3", "fn4"))
    common.add_argument("--g", help="expression for g(x), e.g. 'x^2' or 'exp(s*(x-1))/s'")
    common.add_argument("--param", action="append", metavar="K=V", help="expression parameter (repeatable)")
    common.add_argument("--s", type=float)
    common.add_argument("--N", type=int)
    common.add_argument("--delta", help="positive number or 'auto'")
    common.add_argument("--kappa", help="disk: 0 | r2 | c0,c1,... ; bidisk: 0 | r2 | a,b,c")
    common.add_argument("--R", help="zero | const:<v> | radial:<csv file>")
    common.add_argument("--gamma", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--grid", type=int)
    common.add_argument("--degree", type=int, default=4)
    common.add_argument("--f", default="1", help="coefficients of f(z), constant first")
    common.add_argument("--xmax", type=float, default=100.0)
    common.add_argument("--tol", type=float)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out")
    common.add_argument("--jobs", type=int, default=1)

    parser = _Parser(prog="l2ext", description="L2 extension constants and model verification")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (UsageError, ExprError, ValueError, ArithmeticError, OSError) as exc:
        print(f"l2ext {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
