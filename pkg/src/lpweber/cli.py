"""Command-line entry point: ``solve``, ``backtest`` and ``sweep``.

Exit codes: 0 success, 1 bad input data or parameters, 2 iteration limit
reached without convergence, 64 command-line usage error.
"""

from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from .backtest import (
    BacktestConfig,
    load_price_relatives,
    run_backtest,
    write_backtest_csv,
    write_summary,
)
from .core import load_instance_csv
from .exceptions import LpWeberError
from .experiments import DEFAULT_GRID, MODES, SweepSpec, run_sweep, sweep_table
from .solver import MAX_ITER_REACHED, SolverConfig, format_result, solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAXITER = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text):
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")
    return vals


def _window(text):
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid window {text!r}") from None
    if m < 2:
        raise argparse.ArgumentTypeError("window must be >= 2")
    return m


def _add_solver_flags(sp):
    sp.add_argument("--tol", type=float, default=1e-4, help="relative step tolerance")
    sp.add_argument("--tol2", type=float, default=1e-14, help="relative cost tolerance")
    sp.add_argument("--rho", type=float, default=0.1, help="line-search shrink factor")
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--max-linesearch", type=int, default=200)
    sp.add_argument("--grad-tol", type=float, default=1e-10)
    sp.add_argument("--eps-sing", type=float, default=1e-12,
                    help="relative band for detecting coordinate matches")


def _solver_config(args, **extra):
    try:
        return SolverConfig(rho=args.rho, tol=args.tol, tol2=args.tol2, grad_tol=args.grad_tol,
                            max_iter=args.max_iter, max_linesearch=args.max_linesearch,
                            eps_sing=args.eps_sing, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpweber", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", help="minimize one instance read from CSV")
    sp.add_argument("--input", required=True, help="CSV with header w,x1,...,xd")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--q", type=float, required=True)
    start = sp.add_mutually_exclusive_group()
    start.add_argument("--y0", type=_float_list, help="comma-separated starting point")
    start.add_argument("--y0-mode", choices=("mean", "first-point"), default="mean")
    _add_solver_flags(sp)
    sp.add_argument("--trajectory", action="store_true", help="append the iterate table")
    sp.set_defaults(func=cmd_solve)

    bp = sub.add_parser("backtest", help="run the portfolio backtest on a price-relative CSV")
    bp.add_argument("--prices", required=True)
    bp.add_argument("--p", type=float, required=True)
    bp.add_argument("--q", type=float, required=True)
    bp.add_argument("--window", type=_window, default=5)
    bp.add_argument("--epsilon", type=float, default=5.0)
    bp.add_argument("--out", default="backtest",
                    help="prefix for <out>_result.csv and <out>_summary.txt")
    _add_solver_flags(bp)
    bp.set_defaults(func=cmd_backtest)

    wp = sub.add_parser("sweep", help="tabulate a metric over a (q, p) grid")
    wp.add_argument("--mode", required=True, choices=MODES)
    wp.add_argument("--p-grid", type=_float_list, default=DEFAULT_GRID)
    wp.add_argument("--q-grid", type=_float_list, default=DEFAULT_GRID)
    wp.add_argument("--reps", type=int, default=20)
    wp.add_argument("--seed", type=int, default=0)
    wp.add_argument("--dims", type=_int_list, default=(50,),
                    help="asset counts, cycled over repetitions")
    wp.add_argument("--window", type=_window, default=5)
    wp.add_argument("--metric", default=None,
                    choices=("iterations", "runtime", "conv_rate", "singular_escape_iters"))
    wp.add_argument("--periods", type=int, default=200, help="backtest mode: series length")
    wp.add_argument("--assets", type=int, default=10, help="backtest mode: asset count")
    wp.add_argument("--epsilon", type=float, default=5.0, help="backtest mode: reversion threshold")
    wp.add_argument("--workers", type=int, default=1)
    wp.add_argument("--out", default=None, help="write the table here instead of stdout")
    _add_solver_flags(wp)
    wp.set_defaults(func=cmd_sweep)
    return parser


def cmd_solve(args) -> int:
    config = _solver_config(args, record_trajectory=True)
    inst = load_instance_csv(args.input, args.p, args.q)
    if args.y0 is not None:
        y0 = np.array(args.y0)
    elif args.y0_mode == "first-point":
        y0 = inst.points[0]
    else:
        y0 = inst.points.mean(axis=0)
    res = solve(inst, y0, config)
    if not args.trajectory:
        res.trajectory = None
    sys.stdout.write(format_result(res))
    return EXIT_MAXITER if res.status == MAX_ITER_REACHED else EXIT_OK


def cmd_backtest(args) -> int:
    try:
        config = BacktestConfig(p=args.p, q=args.q, window_m=args.window, epsilon=args.epsilon,
                                solver=_solver_config(args))
    except LpWeberError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    series = load_price_relatives(args.prices)
    result = run_backtest(series, config)
    write_backtest_csv(f"{args.out}_result.csv", result)
    write_summary(f"{args.out}_summary.txt", result, config)
    print(f"CW: {result.cumulative_wealth:.4f}")
    print(f"SR: {result.sharpe_ratio:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.reps < 1 or args.workers < 1 or args.periods < 2 or args.assets < 2:
        raise UsageError("--reps and --workers must be >= 1; --periods and --assets >= 2")
    spec = SweepSpec(p_values=args.p_grid, q_values=args.q_grid, repetitions=args.reps,
                     seed=args.seed, dims=args.dims, window_m=args.window,
                     solver=_solver_config(args), periods=args.periods, assets=args.assets,
                     epsilon=args.epsilon)
    cells = run_sweep(args.mode, spec, workers=args.workers)
    table = sweep_table(args.mode, cells, spec, args.metric)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        print(f"lpweber {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LpWeberError, ValueError, OSError) as exc:
        print(f"lpweber {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
