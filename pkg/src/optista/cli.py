"""Command-line runner: ``optista {run,certify,lowerbound,table}``.

Every command writes CSV (17 significant digits) to stdout or ``--out``
and a one-line summary to stderr. Exit codes: 0 when the checked property
holds, 1 when it fails, 2 on usage errors.

Options may also come from ``--config FILE`` holding ``key = value`` lines
that mirror the long flag names (``n-max = 10``). Flags on the command
line win over the file.

Random instances use numpy's default generator (PCG64) seeded with
``--seed``, so tables are reproducible across platforms.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import List, Optional

import numpy as np

from . import certificates as cert
from .lowerbounds import ConstructionError, matching_bound_report, proximal_matching_report
from .methods import METHODS, optista_fsfom_coefficients, run_method
from .oracles import INSTANCE_NAMES, _literal, build_instance, parse_key_values

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
BOUND_RTOL = 1e-9


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "PASS" if v else "FAIL"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def _write_csv(args, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _say(msg):
    print(msg, file=sys.stderr)


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return v


def _float_list(s):
    try:
        vals = [float(t) for t in str(s).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {s!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("need one or more positive numbers")
    return vals


def _bool(s):
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _instance_params(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"--param expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip().replace("-", "_")] = _literal(v.strip())
    return out


def _build(args):
    try:
        return build_instance(args.instance, args.seed, **_instance_params(args.param))
    except TypeError as e:
        raise UsageError(f"bad instance parameter: {e}") from None


def _start(args, problem):
    if args.start == "zero":
        return np.zeros(problem.dim)
    return np.random.default_rng(args.seed + 1).normal(size=problem.dim)


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    problem = _build(args)
    x0 = _start(args, problem)
    try:
        traj = run_method(args.method, problem, x0, args.n)
    except ValueError as e:
        raise UsageError(str(e)) from None
    R = float(np.linalg.norm(x0 - problem.x_star))
    rows = [(i, Fi, gap, traj.bound) for i, Fi, gap, _, _ in traj.rows()]
    _write_csv(args, ["iter", "objective", "gap", "bound_at_N"], rows)
    ok = traj.gap <= traj.bound + BOUND_RTOL * problem.L * R**2
    _say(f"{'PASS' if ok else 'FAIL'}: {args.method} on {problem.name}, N={args.n}: "
         f"gap {traj.gap:.6e} vs bound {traj.bound:.6e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_certify(args) -> int:
    rows, all_ok = [], True
    for N in range(1, args.n_max + 1):
        cons = cert.build_constraints(
            cert.build_pep_basis(N, optista_fsfom_coefficients(N), args.L))
        c = cert.analytic_certificate(N, args.L)
        if args.perturb:
            c = c.perturbed("lam", (0, 1), args.perturb_size, cons)
        rep = cert.verify_certificate(c, cons, args.R)
        all_ok &= rep.passed
        rows.append(rep)
    if args.format == "json":
        text = "".join(r.to_json() + "\n" for r in rows)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        _write_csv(args, list(cert.VerificationReport.FIELDS), [r.row() for r in rows])
    _say(f"{'PASS' if all_ok else 'FAIL'}: certificate for N=1..{args.n_max}")
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_lowerbound(args) -> int:
    reports = []
    try:
        if args.kind == "composite":
            Ns = [args.n] if args.n else range(1, args.n_max + 1)
            reports = [matching_bound_report(N, args.L, args.R, tol=args.tol) for N in Ns]
        else:
            if args.gammas:
                schedules = [args.gammas]
            else:
                Ns = [args.n] if args.n else range(1, args.n_max + 1)
                schedules = [list(args.ratio ** np.arange(N)) for N in Ns]
            reports = [proximal_matching_report(g, args.R, tol=args.tol) for g in schedules]
    except ConstructionError as e:
        _say(f"FAIL: {e}")
        return EXIT_FAIL
    _write_csv(args, ["N", "gap", "bound", "rel_mismatch", "pass"],
               [(r.n, r.gap, r.bound, r.rel_mismatch, r.passed) for r in reports])
    ok = all(r.passed for r in reports)
    worst = max(r.rel_mismatch for r in reports)
    _say(f"{'PASS' if ok else 'FAIL'}: {args.kind} matching bound, worst mismatch {worst:.3e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_table(args) -> int:
    problem = _build(args)
    x0 = _start(args, problem)
    R = float(np.linalg.norm(x0 - problem.x_star))
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    rows, ok = [], True
    for m in methods:
        for N in range(1, args.n_max + 1):
            try:
                t = run_method(m, problem, x0, N)
            except ValueError as e:
                raise UsageError(str(e)) from None
            holds = t.gap <= t.bound + BOUND_RTOL * problem.L * R**2
            ok &= holds
            rows.append((m, N, t.gap, t.bound, t.gap / t.bound if t.bound else None, holds))
    _write_csv(args, ["method", "N", "gap", "bound", "gap_over_bound", "pass"], rows)
    _say(f"{'PASS' if ok else 'FAIL'}: table on {problem.name}, methods {','.join(methods)}")
    return EXIT_OK if ok else EXIT_FAIL


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of key = value lines mirroring the flags")
    common.add_argument("--out", help="write CSV here instead of stdout")

    inst = argparse.ArgumentParser(add_help=False)
    inst.add_argument("--instance", choices=INSTANCE_NAMES, default="lasso")
    inst.add_argument("--seed", type=int, default=0)
    inst.add_argument("--param", action="append", metavar="KEY=VALUE",
                      help="instance parameter, e.g. --param lam=0.3 (repeatable)")
    inst.add_argument("--start", choices=("zero", "random"), default="zero",
                      help="x0 = 0 or a seeded Gaussian point")

    p = argparse.ArgumentParser(prog="optista", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common, inst], help="run one method and check its rate")
    r.add_argument("--method", choices=sorted(METHODS), default="optista")
    r.add_argument("--n", type=_positive_int, default=10)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("certify", parents=[common], help="verify the dual certificate for N=1..n_max")
    c.add_argument("--n-max", type=_positive_int, default=10)
    c.add_argument("--L", type=_positive_float, default=1.0)
    c.add_argument("--R", type=_positive_float, default=1.0)
    c.add_argument("--perturb", type=_bool, nargs="?", const=True, default=False,
                   help="shift the (0,1) multiplier to exercise the failure path")
    c.add_argument("--perturb-size", type=float, default=0.1)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.set_defaults(func=cmd_certify)

    lb = sub.add_parser("lowerbound", parents=[common], help="run the matching-bound instances")
    lb.add_argument("kind", choices=("composite", "proximal"))
    lb.add_argument("--n", type=_positive_int, help="single horizon (overrides --n-max)")
    lb.add_argument("--n-max", type=_positive_int, default=10)
    lb.add_argument("--L", type=_positive_float, default=1.0)
    lb.add_argument("--R", type=_positive_float, default=1.0)
    lb.add_argument("--gammas", type=_float_list, help="proximal stepsizes, e.g. 1,2,4")
    lb.add_argument("--ratio", type=_positive_float, default=1.0,
                    help="geometric ratio of the proximal stepsizes when --gammas is absent")
    lb.add_argument("--tol", type=_positive_float, default=1e-6)
    lb.set_defaults(func=cmd_lowerbound)

    t = sub.add_parser("table", parents=[common, inst], help="gap and bound for N=1..n_max per method")
    t.add_argument("--methods", default="optista,fista,ista")
    t.add_argument("--n-max", type=_positive_int, default=20)
    t.set_defaults(func=cmd_table)
    p._subparsers_by_name = {"run": r, "certify": c, "lowerbound": lb, "table": t}
    return p


def _apply_config(parser, argv: List[str]):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            kv = parse_key_values(fh.read())
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read config: {e}") from None
    cmd = next((a for a in argv if a in parser._subparsers_by_name), None)
    if cmd is None:
        return
    sp = parser._subparsers_by_name[cmd]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for k, v in kv.items():
        if k not in dests or k in ("config", "help", "kind"):
            raise UsageError(f"unknown config key {k!r} for {cmd}")
        defaults[k] = [v] if dests[k].dest == "param" else v
    sp.set_defaults(**defaults)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        # string defaults from a config file skip argparse's type conversion for lists
        if isinstance(getattr(args, "param", None), list):
            args.param = [p for item in args.param for p in str(item).split(";") if p.strip()]
        return args.func(args)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except UsageError as e:
        _say(f"usage error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
