"""Online portfolio selection driven by l_p-median price prediction.

Each period the last ``window_m`` reconstructed prices are summarized by the
q-th-powered l_p median, turned into a predicted price relative, and fed to a
passive-aggressive mean-reversion update of the portfolio.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import PowerNormParams, build_instance
from .exceptions import (
    CollinearWarning,
    EmptyInput,
    HitDataPoint,
    NonPositiveRelative,
    ParseError,
    ZeroVarianceWarning,
)
from .oracle import l2_weiszfeld
from .solver import SolveResult, SolverConfig, solve

PERIOD_TAGS = ("daily", "weekly", "monthly")


@dataclass(frozen=True)
class PriceRelativeSeries:
    relatives: np.ndarray
    asset_names: Optional[tuple] = None
    period_tag: str = "daily"

    def __post_init__(self):
        R = np.array(self.relatives, dtype=float)
        if R.ndim != 2 or R.shape[0] < 2 or R.shape[1] < 2:
            raise ValueError(f"need at least 2 periods and 2 assets, got shape {R.shape}")
        bad = np.argwhere(~(R > 0))
        if bad.size:
            r, c = (int(v) for v in bad[0])
            raise NonPositiveRelative(f"price relative at row {r}, column {c} is not positive",
                                      row=r, col=c)
        if self.asset_names is not None and len(self.asset_names) != R.shape[1]:
            raise ValueError("asset_names must have one label per column")
        if self.period_tag not in PERIOD_TAGS:
            raise ValueError(f"period_tag must be one of {PERIOD_TAGS}")
        R.setflags(write=False)
        object.__setattr__(self, "relatives", R)
        if self.asset_names is not None:
            object.__setattr__(self, "asset_names", tuple(self.asset_names))

    @property
    def T(self) -> int:
        return self.relatives.shape[0]

    @property
    def d(self) -> int:
        return self.relatives.shape[1]

    def prices(self) -> np.ndarray:
        """Price path ``(T + 1, d)`` starting from an all-ones row."""
        return np.vstack([np.ones(self.d), np.cumprod(self.relatives, axis=0)])


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_price_relatives(path, header: Optional[bool] = None,
                         period_tag: str = "daily") -> PriceRelativeSeries:
    """Read a ``T x d`` CSV of price relatives.

    ``header=None`` treats the first row as asset names when any of its cells
    is not a number. Row and column numbers in errors are 1-based file
    positions.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyInput(f"{path}: no rows")
    names = None
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    start = 1 if header else 0
    if header:
        names = tuple(c.strip() for c in rows[0])
    width = len(rows[0])
    data = []
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {width}", row=r)
        vals = []
        for c, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: cannot parse {cell!r} at row {r}, column {c}",
                                 row=r, col=c) from None
            if not v > 0 or not math.isfinite(v):
                raise NonPositiveRelative(f"{path}: price relative {cell!r} at row {r}, "
                                          f"column {c} is not a positive number", row=r, col=c)
            vals.append(v)
        data.append(vals)
    if not data:
        raise EmptyInput(f"{path}: header but no data")
    return PriceRelativeSeries(np.array(data), names, period_tag)


def write_price_relatives(path, series: PriceRelativeSeries):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if series.asset_names is not None:
            writer.writerow(series.asset_names)
        for row in series.relatives:
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class BacktestConfig:
    """Backtest settings.

    ``(p, q) = (2, 1)`` selects the classic Euclidean median as the price
    predictor; every other pair must satisfy ``1 <= q <= p < 2``.
    """

    p: float = 1.5
    q: float = 1.0
    window_m: int = 5
    epsilon: float = 5.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial_portfolio: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.is_l2_baseline:
            PowerNormParams(self.p, self.q)
        if int(self.window_m) != self.window_m or self.window_m < 2:
            raise ValueError(f"window_m must be an integer >= 2, got {self.window_m}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.initial_portfolio is not None:
            b = np.asarray(self.initial_portfolio, dtype=float).reshape(-1)
            if np.any(b < 0) or abs(b.sum() - 1.0) > 1e-12:
                raise ValueError("initial_portfolio must lie on the probability simplex")
            b.setflags(write=False)
            object.__setattr__(self, "initial_portfolio", b)

    @property
    def is_l2_baseline(self) -> bool:
        return self.p == 2.0 and self.q == 1.0


@dataclass
class BacktestResult:
    portfolios: np.ndarray
    period_returns: np.ndarray
    cumulative_wealth: float
    sharpe_ratio: float
    sharpe_degenerate: bool
    solver_stats: dict

    @property
    def wealth_path(self) -> np.ndarray:
        return np.cumprod(self.period_returns)


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto ``{b : b >= 0, sum(b) = 1}``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise EmptyInput("cannot project an empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def reversion_update(b, x_hat, epsilon: float) -> np.ndarray:
    """Passive-aggressive step toward assets predicted to revert upward."""
    b = np.asarray(b, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    centred = x_hat - x_hat.mean()
    denom = float(centred @ centred)
    if denom == 0.0:
        return b.copy()
    tau = max(0.0, (epsilon - float(b @ x_hat)) / denom)
    if tau == 0.0:
        return b.copy()
    return simplex_project(b + tau * centred)


def window_median(price_window, p: float, q: float, config: SolverConfig = SolverConfig(),
                  y0=None):
    """Unweighted median of a price window.

    Returns ``(median, SolveResult or None)``; the result is None for the
    Euclidean baseline, which does not go through :func:`solve`.
    """
    W = np.asarray(price_window, dtype=float)
    if p == 2.0 and q == 1.0:
        return _l2_median(W, y0), None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CollinearWarning)
        inst = build_instance(W, None, p, q)
    res = solve(inst, W.mean(axis=0) if y0 is None else y0, config)
    return res.minimizer, res


def _l2_median(W, y0):
    X, counts = np.unique(W, axis=0, return_counts=True)
    start = W.mean(axis=0) if y0 is None else np.asarray(y0, dtype=float)
    try:
        return l2_weiszfeld(X, counts, start)
    except HitDataPoint:
        # restart once from a slightly shifted point
        shift = 1e-7 * (1.0 + np.abs(start)) * np.where(np.arange(start.size) % 2, -1.0, 1.0)
        return l2_weiszfeld(X, counts, start + shift)


def predict_price_relatives(price_window, last_price, params, solver_config: SolverConfig = SolverConfig(),
                            y0=None) -> np.ndarray:
    """Predicted next-period price relatives ``median / last_price``.

    ``params`` is a :class:`PowerNormParams` or a ``(p, q)`` pair; ``(2, 1)``
    uses the Euclidean median.
    """
    p, q = (params.p, params.q) if isinstance(params, PowerNormParams) else params
    median, _ = window_median(price_window, p, q, solver_config, y0)
    return median / np.asarray(last_price, dtype=float)


def sharpe_ratio(returns, warn: bool = True) -> float:
    """Mean over sample standard deviation, zero risk-free rate.

    Returns 0 (with a :class:`ZeroVarianceWarning`) when the returns are
    constant.
    """
    r = np.asarray(returns, dtype=float).reshape(-1)
    if r.size < 2:
        raise ValueError("need at least two returns")
    sd = float(np.std(r, ddof=1))
    if sd <= 1e-15 * max(1.0, float(np.abs(r).max())):
        if warn:
            warnings.warn("returns have zero variance; Sharpe ratio set to 0",
                          ZeroVarianceWarning, stacklevel=2)
        return 0.0
    return float(np.mean(r)) / sd


def run_backtest(series: PriceRelativeSeries, config: BacktestConfig = BacktestConfig()) -> BacktestResult:
    """Trade every period, starting from the initial portfolio.

    The portfolio is held unchanged until ``window_m`` prices (counting the
    all-ones starting row) are known; from then on each period's closing
    window drives the update for the next period.
    """
    d, T, m = series.d, series.T, config.window_m
    P = series.prices()
    if config.initial_portfolio is None:
        b = np.full(d, 1.0 / d)
    else:
        b = np.array(config.initial_portfolio, dtype=float)
        if b.size != d:
            raise ValueError(f"initial_portfolio has {b.size} entries for {d} assets")
    portfolios = np.empty((T, d))
    rets = np.empty(T)
    iters, hits, statuses = [], 0, Counter()
    y0 = None
    for t in range(1, T + 1):
        portfolios[t - 1] = b
        rets[t - 1] = float(b @ series.relatives[t - 1])
        if t == T or t + 1 < m:
            continue
        window = P[t - m + 1:t + 1]
        median, res = window_median(window, config.p, config.q, config.solver, y0)
        if res is not None:
            iters.append(res.iterations)
            hits += res.singular_hits
            statuses[res.status] += 1
        y0 = median
        b = reversion_update(b, median / P[t], config.epsilon)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ZeroVarianceWarning)
        sr = sharpe_ratio(rets - 1.0)
    degenerate = any(issubclass(w.category, ZeroVarianceWarning) for w in caught)
    stats = {
        "solves": len(iters),
        "mean_iterations": float(np.mean(iters)) if iters else 0.0,
        "max_iterations": int(max(iters)) if iters else 0,
        "singular_hits": hits,
        "statuses": dict(sorted(statuses.items())),
    }
    return BacktestResult(portfolios, rets, float(np.prod(rets)), sr, degenerate, stats)


def write_backtest_csv(path, result: BacktestResult):
    """Per-period table: ``period,b_1..b_d,return,wealth``."""
    d = result.portfolios.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period"] + [f"b_{j + 1}" for j in range(d)] + ["return", "wealth"])
        for t, (b, r, w) in enumerate(zip(result.portfolios, result.period_returns,
                                          result.wealth_path), start=1):
            writer.writerow([t] + [repr(float(v)) for v in b] + [repr(float(r)), repr(float(w))])


def summary_lines(result: BacktestResult, config: Optional[BacktestConfig] = None) -> List[str]:
    lines = []
    if config is not None:
        lines += [f"p: {config.p}", f"q: {config.q}", f"window_m: {config.window_m}",
                  f"epsilon: {config.epsilon}"]
    st = result.solver_stats
    lines += [
        f"periods: {len(result.period_returns)}",
        f"cumulative_wealth: {result.cumulative_wealth!r}",
        f"sharpe_ratio: {result.sharpe_ratio!r}",
        f"sharpe_degenerate: {str(result.sharpe_degenerate).lower()}",
        f"solves: {st['solves']}",
        f"mean_iterations: {st['mean_iterations']!r}",
        f"max_iterations: {st['max_iterations']}",
        f"singular_hits: {st['singular_hits']}",
        "statuses: " + ",".join(f"{k}={v}" for k, v in st["statuses"].items()),
    ]
    return lines


def write_summary(path, result: BacktestResult, config: Optional[BacktestConfig] = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary_lines(result, config)) + "\n")


def log_wealth_gap(result: BacktestResult) -> float:
    """|log CW - sum log(b_t . r_t)|; zero up to rounding."""
    return abs(math.log(result.cumulative_wealth) - float(np.sum(np.log(result.period_returns))))


__all__: Sequence[str] = (
    "PriceRelativeSeries", "BacktestConfig", "BacktestResult", "load_price_relatives",
    "write_price_relatives", "simplex_project", "reversion_update", "window_median",
    "predict_price_relatives", "sharpe_ratio", "run_backtest", "write_backtest_csv",
    "write_summary", "summary_lines", "log_wealth_gap",
)
