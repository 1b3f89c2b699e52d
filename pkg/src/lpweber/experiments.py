"""Seeded synthetic workloads and (q, p) parameter sweeps.

Every run draws from its own child of a :class:`numpy.random.SeedSequence`,
so results depend only on the seed and the run index, never on scheduling.
"""

from __future__ import annotations

import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .backtest import BacktestConfig, PriceRelativeSeries, run_backtest
from .core import build_instance, cost
from .exceptions import CollinearWarning
from .solver import CONVERGED_STATUSES, SolverConfig, solve

MODES = ("singular-escape", "convergence", "rate", "backtest")
METRICS = ("iterations", "runtime", "conv_rate", "singular_escape_iters", "cw", "sr")
DEFAULT_GRID = tuple(round(1.0 + 0.1 * k, 1) for k in range(10))


def geometric_random_walk(rng, T, d, vol=0.02, drift=0.0) -> np.ndarray:
    """``T x d`` log-normal price relatives."""
    return np.exp(rng.normal(drift, vol, size=(T, d)))


def price_window(rng, m=5, d=50, vol=0.02, integer=False) -> np.ndarray:
    """``m`` consecutive prices of ``d`` assets with log-uniform levels in [5, 200].

    ``integer=True`` quotes prices in whole cents, which produces repeated
    coordinates across the window.
    """
    level = np.exp(rng.uniform(math.log(5.0), math.log(200.0), size=d))
    X = level * np.cumprod(geometric_random_walk(rng, m, d, vol), axis=0)
    if integer:
        X = np.round(100.0 * X)
    return X


def synthetic_series(seed, T=200, d=10, vol=0.02) -> PriceRelativeSeries:
    rng = np.random.default_rng(seed)
    return PriceRelativeSeries(geometric_random_walk(rng, T, d, vol))


@dataclass(frozen=True)
class SweepSpec:
    p_values: Tuple[float, ...] = DEFAULT_GRID
    q_values: Tuple[float, ...] = DEFAULT_GRID
    repetitions: int = 20
    seed: int = 0
    metrics: frozenset = frozenset()
    dims: Tuple[int, ...] = (50,)
    window_m: int = 5
    solver: SolverConfig = field(default_factory=SolverConfig)
    # backtest mode
    periods: int = 200
    assets: int = 10
    epsilon: float = 5.0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.dims or min(self.dims) < 1:
            raise ValueError("dims must be positive")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")

    def pairs(self) -> List[Tuple[float, float]]:
        """Valid ``(q, p)`` cells in row-major table order."""
        return [(q, p) for q in self.q_values for p in self.p_values if q <= p]


def _window_for(spec, run, integer):
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(run + 1)[run])
    d = spec.dims[run % len(spec.dims)]
    return price_window(rng, spec.window_m, d, integer=integer)


def _instance(X, p, q):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CollinearWarning)
        return build_instance(X, None, p, q)


def run_cell(mode: str, q: float, p: float, spec: SweepSpec) -> Dict[str, list]:
    """Per-run measurements for one ``(q, p)`` cell.

    Runs with the same index share the same data window across cells. Every
    mode starts the solver at the first window row ``x_1``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    out: Dict[str, list] = {}

    def add(key, val):
        out.setdefault(key, []).append(val)

    if mode == "backtest":
        series = synthetic_series(spec.seed, spec.periods, spec.assets)
        cfg = BacktestConfig(p=p, q=q, window_m=spec.window_m, epsilon=spec.epsilon,
                             solver=spec.solver)
        res = run_backtest(series, cfg)
        add("cw", res.cumulative_wealth)
        add("sr", res.sharpe_ratio)
        add("iterations", res.solver_stats["mean_iterations"])
        return out

    for run in range(spec.repetitions):
        if mode == "singular-escape":
            X = _window_for(spec, run, integer=True)
            inst = _instance(X, p, q)
            res = solve(inst, inst.points[0], replace(spec.solver, max_iter=1))
            # zero when x_1 is already certified optimal
            add("singular_escape_iters", res.first_descent_trials or 0)
            add("reduced", res.cost < cost(inst, inst.points[0]))
            continue
        X = _window_for(spec, run, integer=False)
        inst = _instance(X, p, q)
        cfg = spec.solver
        if mode == "rate" and not cfg.record_trajectory:
            cfg = replace(cfg, record_trajectory=True)
        t0 = time.perf_counter()
        res = solve(inst, inst.points[0], cfg)
        add("runtime", time.perf_counter() - t0)
        add("iterations", res.iterations)
        add("converged", res.status in CONVERGED_STATUSES)
        add("status", res.status)
        if res.convergence_rate is not None:
            add("conv_rate", res.convergence_rate)
        if res.trajectory is not None:
            add("costs", [s.cost for s in res.trajectory])
    return out


def _cell_task(args):
    mode, q, p, spec = args
    return run_cell(mode, q, p, spec)


def run_sweep(mode: str, spec: SweepSpec, workers: int = 1) -> Dict[Tuple[float, float], Dict[str, list]]:
    """Run every valid cell; the result is keyed and ordered by ``(q, p)``."""
    pairs = spec.pairs()
    tasks = [(mode, q, p, spec) for q, p in pairs]
    if mode == "backtest" and 2.0 not in spec.p_values:
        pairs.append((1.0, 2.0))
        tasks.append((mode, 1.0, 2.0, spec))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [_cell_task(t) for t in tasks]
    return dict(zip(pairs, results))


PRIMARY_METRIC = {
    "singular-escape": "singular_escape_iters",
    "convergence": "iterations",
    "rate": "conv_rate",
    "backtest": "cw",
}


def _fmt_cell(values, decimals):
    if not values:
        return "NA"
    a = np.asarray(values, dtype=float)
    sd = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return f"{a.mean():.{decimals}f}±{sd:.{decimals}f}"


def triangular_table(cells, p_values: Sequence[float], q_values: Sequence[float],
                     metric: str, decimals: int = 2) -> str:
    """CSV with rows q, columns p, ``-`` where ``q > p``, cells ``mean±std``."""
    buf = io.StringIO()
    buf.write("q\\p," + ",".join(f"{p:g}" for p in p_values) + "\n")
    for q in q_values:
        row = [f"{q:g}"]
        for p in p_values:
            if q > p:
                row.append("-")
            else:
                row.append(_fmt_cell(cells.get((q, p), {}).get(metric, []), decimals))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def backtest_table(cells, p_values: Sequence[float], q_values: Sequence[float]) -> str:
    """Two rows per q (CW then SR) plus the Euclidean baseline rows."""
    buf = io.StringIO()
    buf.write("q,metric," + ",".join(f"{p:g}" for p in p_values) + "\n")
    for q in q_values:
        for key, name in (("cw", "CW"), ("sr", "SR")):
            row = [f"{q:g}", name]
            for p in p_values:
                vals = cells.get((q, p), {}).get(key)
                row.append("-" if q > p or not vals else f"{vals[0]:.4f}")
            buf.write(",".join(row) + "\n")
    base = cells.get((1.0, 2.0))
    if base:
        buf.write(f"baseline(1;2),CW,{base['cw'][0]:.4f}\n")
        buf.write(f"baseline(1;2),SR,{base['sr'][0]:.4f}\n")
    return buf.getvalue()


def sweep_table(mode: str, cells, spec: SweepSpec, metric: Optional[str] = None) -> str:
    if mode == "backtest":
        return backtest_table(cells, spec.p_values, spec.q_values)
    metric = metric or PRIMARY_METRIC[mode]
    decimals = 4 if metric in ("conv_rate", "runtime") else 2
    return triangular_table(cells, spec.p_values, spec.q_values, metric, decimals)
