"""``asrga`` command line: solve, compare, check and gen.

Exit status: 0 on success, 1 when a property check or a solver run fails,
2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import checks, composite
from .bench import build_report, generate, write_trace
from .config import (
    ConfigError,
    build_instance,
    config_echo,
    load_run_config,
    load_synthetic_spec,
    solver_config,
    synthetic_spec,
)
from .errors import AsrgaError, NumericError
from .manifolds import random_point
from .matrixio import write_matrix
from .solvers import run_solver

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

TABLE_COLUMNS = ("solver", "iterations", "retractions", "final metric", "f_true", "stop reason")


def _print(args, *msg):
    if not args.quiet:
        print(*msg)


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.6e}" if isinstance(v, float) else str(v)


def format_table(rows):
    table = [TABLE_COLUMNS] + [tuple(_fmt(v) for v in row) for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _run_config(args, default_solvers=None):
    """Run the selected solvers of a config from one shared starting point.

    Returns ``(rows, ok)`` with one comparison-table row per solver.
    """
    cfg = load_run_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
    elif cfg.out_dir is not None:
        out_dir = cfg._base_dir / cfg.out_dir
    else:
        out_dir = Path(".")
    solvers = cfg.solvers
    if default_solvers is not None and "solvers" not in cfg.model_fields_set:
        solvers = list(default_solvers)
    configs = {name: solver_config(cfg, name, seed, args.stride) for name in solvers}
    prob, inst, metric = build_instance(cfg, seed)
    X0 = random_point(prob.manifold, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    ok = True
    for name in solvers:
        try:
            res = run_solver(name, prob, configs[name], X0=X0, metric=metric)
        except NumericError as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            partial = getattr(exc, "result", None)
            if partial is not None:
                write_trace(out_dir / f"{name}_trace.csv", partial.trace)
            ok = False
            rows.append((name, "-", "-", None, None, "nonfinite"))
            continue
        trace_path = out_dir / f"{name}_trace.csv"
        report_path = out_dir / f"{name}_report.txt"
        write_trace(trace_path, res.trace)
        report = build_report(
            res, res.trace, prob.p, prob.name, seed, trace_path.name, config_echo(cfg, name, seed)
        )
        report.write(report_path)
        _print(args, f"{name}: {res.stop_reason} after {res.iterations} iterations; wrote {trace_path}, {report_path}")
        final_metric = None if metric is None else float(metric(res.x))
        rows.append(
            (name, res.iterations, res.retractions, final_metric, composite.true_value(prob, res.x), res.stop_reason)
        )
    return rows, ok


def cmd_solve(args):
    _, ok = _run_config(args)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(args):
    rows, ok = _run_config(args, default_solvers=("asrga", "rssd", "naive_adagrad"))
    print(format_table(rows))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check(args):
    kwargs = {}
    if args.corrupt_gradient is not None:
        if args.suite != "gradients":
            raise ConfigError("--corrupt-gradient only applies to the gradients suite")
        factor = args.corrupt_gradient
        kwargs["corrupt"] = lambda G: factor * G
    results = checks.run_suite(args.suite, **kwargs)
    failed = [r for r in results if not r.passed]
    for r in results:
        if not args.quiet or not r.passed:
            print(r.line())
    _print(args, f"{args.suite}: {len(results) - len(failed)}/{len(results)} properties passed")
    return EXIT_FAIL if failed else EXIT_OK


def truth_path(out):
    out = Path(out)
    return out.with_name(f"{out.stem}.truth{out.suffix}")


def cmd_gen(args):
    spec = synthetic_spec(load_synthetic_spec(args.spec), args.seed)
    inst = generate(spec)
    out = Path(args.out_dir) / args.out if args.out_dir else Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(out, inst.data)
    _print(args, f"wrote {out} ({inst.data.shape[0]}x{inst.data.shape[1]})")
    if inst.ground_truth is not None:
        tp = truth_path(out)
        write_matrix(tp, inst.ground_truth)
        _print(args, f"wrote {tp}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="directory for traces, reports and generated data")
    common.add_argument("--seed", type=int, help="override the seed of the config")
    common.add_argument("--stride", type=int, help="keep every N-th trace row (the last is always kept)")
    common.add_argument("--quiet", action="store_true", help="only print errors and results")

    parser = argparse.ArgumentParser(
        prog="asrga", description="Adaptive smoothing Riemannian gradient solvers."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="run the solvers of a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("compare", parents=[common], help="run solvers from one start and tabulate")
    p.add_argument("config")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("check", parents=[common], help="run a property suite")
    p.add_argument("suite", choices=sorted(checks.SUITES))
    p.add_argument("--corrupt-gradient", type=float, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("gen", parents=[common], help="write synthetic data to a matrix file")
    p.add_argument("spec")
    p.add_argument("out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.stride is not None and args.stride < 1:
        parser.error("--stride must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except AsrgaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

