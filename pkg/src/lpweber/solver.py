"""Weiszfeld iteration with de-singularity descent at singular iterates."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import (
    DEFAULT_EPS_SING,
    IterateState,
    ProblemInstance,
    _as_point,
    cost,
    lp_norm,
    lp_norms,
    singularity_profile,
)
from .desingularity import DEFAULT_GRAD_TOL, OptimalityCertificate, certify, descent_direction
from .exceptions import (
    AtMinimum,
    LineSearchExhausted,
    NonFiniteIterate,
    ParseError,
    SingularPoint,
    TrajectoryTooShort,
)

logger = logging.getLogger(__name__)

CONVERGED_STEP = "ConvergedStep"
CONVERGED_COST = "ConvergedCost"
OPTIMAL_CERTIFIED = "OptimalCertified"
MAX_ITER_REACHED = "MaxIterReached"
LINE_SEARCH_EXHAUSTED = "LineSearchExhausted"

CONVERGED_STATUSES = frozenset({CONVERGED_STEP, CONVERGED_COST, OPTIMAL_CERTIFIED})


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 0.1
    tol: float = 1e-4
    tol2: float = 1e-14
    grad_tol: float = DEFAULT_GRAD_TOL
    max_iter: int = 1000
    max_linesearch: int = 200
    eps_sing: float = DEFAULT_EPS_SING
    record_trajectory: bool = False
    # "hybrid": at singular iterates also try the Weiszfeld map with matched
    # coordinates held fixed, keeping the lower-cost candidate.
    # "descent": singular iterates only take the line-search descent step.
    singular_mode: str = "hybrid"

    def __post_init__(self):
        if self.singular_mode not in ("hybrid", "descent"):
            raise ValueError(f"unknown singular_mode {self.singular_mode!r}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not (self.tol > 0 and self.tol2 > 0 and self.grad_tol > 0):
            raise ValueError("tol, tol2 and grad_tol must be > 0")
        if self.max_iter < 1 or self.max_linesearch < 1:
            raise ValueError("max_iter and max_linesearch must be >= 1")
        if self.eps_sing < 0:
            raise ValueError("eps_sing must be >= 0")


@dataclass
class SolveResult:
    minimizer: np.ndarray
    cost: float
    iterations: int
    status: str
    singular_hits: int = 0
    trajectory: Optional[List[IterateState]] = None
    convergence_rate: Optional[float] = None
    first_descent_trials: Optional[int] = None
    linesearch_trials: int = 0

    @property
    def converged(self) -> bool:
        return self.status in CONVERGED_STATUSES or self.status == LINE_SEARCH_EXHAUSTED


def weiszfeld_step(instance: ProblemInstance, y) -> np.ndarray:
    """Per-coordinate reweighted average of the data points.

    Weights are ``xi_i * ||y - x_i||_p^(q-p) * |y_t - x_it|^(p-2)``. Undefined
    on the singular set.
    """
    y = _as_point(instance, y)
    X = instance.points
    diff = y - X
    absd = np.abs(diff)
    if np.any(absd == 0):
        raise SingularPoint("Weiszfeld step is undefined on the singular set")
    p, q = instance.p, instance.q
    norms = lp_norms(diff, p)
    # common factors cancel in the ratio; rescale so the largest weight is 1
    row = instance.weights * (norms / norms.min()) ** (q - p)
    w = row[:, None] * (absd / absd.min(axis=0)) ** (p - 2)
    w /= w.max(axis=0)
    return np.sum(w * X, axis=0) / np.sum(w, axis=0)


def extended_weiszfeld_step(instance: ProblemInstance, y, profile=None,
                            eps_sing: float = DEFAULT_EPS_SING) -> np.ndarray:
    """Limit of the Weiszfeld map as nonsingular points approach ``y``.

    Matched (singular) dimensions stay where they are; every other dimension
    gets the ordinary reweighted average. Off the singular set this is
    :func:`weiszfeld_step`.
    """
    y = _as_point(instance, y)
    if profile is None:
        profile = singularity_profile(instance, y, eps_sing)
    if not profile.is_singular:
        return weiszfeld_step(instance, y)
    free = ~profile.mask.any(axis=0)
    out = y.copy()
    if not free.any():
        return out
    X = instance.points
    diff = y - X
    p, q = instance.p, instance.q
    norms = lp_norms(diff, p)
    # free dimensions have no matches, so every norm here is positive
    row = instance.weights * (norms / norms.min()) ** (q - p)
    absd = np.abs(diff[:, free])
    w = row[:, None] * (absd / absd.min(axis=0)) ** (p - 2)
    w /= w.max(axis=0)
    out[free] = np.sum(w * X[:, free], axis=0) / np.sum(w, axis=0)
    return out


def singular_step(instance: ProblemInstance, y, cert: OptimalityCertificate,
                  config: SolverConfig = SolverConfig(), y_cost: Optional[float] = None):
    """Backtracking step along the de-singularity descent direction.

    Tries ``lam = rho**w * ||D||_p`` for w = 0, 1, ... and returns the first
    point with strictly lower cost as ``(y_new, lam, trials)``.
    """
    if cert.is_minimum:
        raise AtMinimum("cannot take a descent step at a certified minimum")
    y = _as_point(instance, y)
    direction = descent_direction(instance, y, cert)
    c0 = cost(instance, y) if y_cost is None else y_cost
    lam = lp_norm(direction, instance.p)
    for w in range(config.max_linesearch):
        trial = y - lam * direction
        if np.array_equal(trial, y):
            raise LineSearchExhausted(f"step vanished after {w} trials", trials=w)
        if cost(instance, trial) < c0:
            return trial, lam, w + 1
        lam *= config.rho
    raise LineSearchExhausted(f"no decrease within {config.max_linesearch} trials",
                              trials=config.max_linesearch)


def _rel(num, den):
    return num / max(den, 1e-300)


def solve(instance: ProblemInstance, y0=None, config: SolverConfig = SolverConfig()) -> SolveResult:
    """Minimize the cost from ``y0`` (default: unweighted mean of the points).

    Off the singular set a Weiszfeld step is taken; on it, the point is
    certified or moved along a descent direction found by line search.
    """
    if y0 is None:
        y0 = instance.points.mean(axis=0)
    y = _as_point(instance, y0).copy()
    if not np.all(np.isfinite(y)):
        raise NonFiniteIterate("starting point is not finite", iteration=0)
    c = cost(instance, y)
    prof = singularity_profile(instance, y, config.eps_sing)
    states = [IterateState(y, c, 0, prof, "initial")] if config.record_trajectory else None
    ys = [y]
    singular_hits = 0
    ls_trials = 0
    first_trials = None
    status = MAX_ITER_REACHED
    k = 0

    while k < config.max_iter:
        if prof.is_singular:
            singular_hits += 1
            cert = certify(instance, y, config.grad_tol, profile=prof)
            if cert.is_minimum:
                status = OPTIMAL_CERTIFIED
                break
            try:
                y_new, _, trials = singular_step(instance, y, cert, config, y_cost=c)
            except LineSearchExhausted as exc:
                ls_trials += exc.trials
                status = LINE_SEARCH_EXHAUSTED
                break
            ls_trials += trials
            if first_trials is None:
                first_trials = trials
            kind = "singular_descent"
            if config.singular_mode == "hybrid":
                y_ext = extended_weiszfeld_step(instance, y, profile=prof)
                if np.all(np.isfinite(y_ext)) and cost(instance, y_ext) < cost(instance, y_new):
                    y_new, kind = y_ext, "weiszfeld"
        else:
            y_new = weiszfeld_step(instance, y)
            if np.linalg.norm(y_new - y) <= config.grad_tol * (1.0 + np.linalg.norm(y)):
                status = OPTIMAL_CERTIFIED
                break
            kind = "weiszfeld"

        if not np.all(np.isfinite(y_new)):
            raise NonFiniteIterate(f"non-finite iterate at iteration {k + 1}", iteration=k + 1)
        c_new = cost(instance, y_new)
        if c_new > c:
            # rounding-level increase: no further resolvable descent
            logger.debug("cost rose from %r to %r at iteration %d; stopping", c, c_new, k + 1)
            status = CONVERGED_COST
            break

        k += 1
        y_prev, c_prev = y, c
        y, c = y_new, c_new
        prof = singularity_profile(instance, y, config.eps_sing)
        ys.append(y)
        if states is not None:
            states.append(IterateState(y, c, k, prof, kind))
        if _rel(np.linalg.norm(y - y_prev), np.linalg.norm(y_prev)) <= config.tol:
            status = CONVERGED_STEP
            break
        if _rel(abs(c - c_prev), abs(c_prev)) <= config.tol2:
            status = CONVERGED_COST
            break

    rate = None
    if len(ys) >= 4:
        try:
            rate = convergence_rate(ys)
        except TrajectoryTooShort:
            rate = None
    return SolveResult(
        minimizer=y,
        cost=c,
        iterations=k,
        status=status,
        singular_hits=singular_hits,
        trajectory=states,
        convergence_rate=rate,
        first_descent_trials=first_trials,
        linesearch_trials=ls_trials,
    )


def convergence_rate(trajectory) -> float:
    """Mean ratio ||y_{o-1} - y_N|| / ||y_{o-2} - y_N|| for o = 3..N.

    Values below 1 indicate at least linear convergence toward the final
    iterate ``y_N``. Terms with a zero denominator are skipped.
    """
    Y = np.asarray([np.asarray(getattr(s, "y", s), dtype=float).reshape(-1) for s in trajectory])
    if Y.shape[0] < 4:
        raise TrajectoryTooShort("at least 4 iterates (y_0..y_3) are required")
    dist = np.linalg.norm(Y - Y[-1], axis=1)
    num, den = dist[2:-1], dist[1:-2]
    ok = den > 0
    if not np.any(ok):
        raise TrajectoryTooShort("every denominator term vanished")
    return float(np.mean(num[ok] / den[ok]))


def format_result(result: SolveResult, precision: int = 17) -> str:
    """Render a result as ``key: value`` lines, plus an optional trajectory table.

    The trajectory block starts with a ``trajectory:`` line followed by CSV
    rows ``k,step_kind,singular,cost,y1,...,yd``.
    """
    def num(v):
        return format(float(v), f".{precision}g")

    lines = [
        f"status: {result.status}",
        "minimizer: " + ",".join(num(v) for v in result.minimizer),
        f"cost: {num(result.cost)}",
        f"iterations: {result.iterations}",
        f"singular_hits: {result.singular_hits}",
        "convergence_rate: " + ("NA" if result.convergence_rate is None else num(result.convergence_rate)),
    ]
    if result.trajectory:
        d = len(result.minimizer)
        lines.append("trajectory:")
        lines.append("k,step_kind,singular,cost," + ",".join(f"y{t + 1}" for t in range(d)))
        for s in result.trajectory:
            lines.append(f"{s.k},{s.step_kind},{int(s.singular.is_singular)},{num(s.cost)},"
                         + ",".join(num(v) for v in s.y))
    return "\n".join(lines) + "\n"


def parse_result(text: str) -> dict:
    """Inverse of :func:`format_result`, returning plain Python values."""
    out = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip():
            continue
        if line.strip() == "trajectory:":
            header = lines[i].split(",")
            i += 1
            rows = []
            while i < len(lines) and lines[i].strip():
                cells = lines[i].split(",")
                rows.append({
                    "k": int(cells[0]),
                    "step_kind": cells[1],
                    "singular": bool(int(cells[2])),
                    "cost": float(cells[3]),
                    "y": [float(v) for v in cells[4:]],
                })
                i += 1
            if len(header) < 4:
                raise ParseError("malformed trajectory header")
            out["trajectory"] = rows
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise ParseError(f"malformed line {line!r}", row=i)
        key, val = key.strip(), val.strip()
        if key == "minimizer":
            out[key] = [float(v) for v in val.split(",")]
        elif key in ("iterations", "singular_hits"):
            out[key] = int(val)
        elif key in ("cost", "convergence_rate"):
            out[key] = None if val == "NA" else float(val)
        else:
            out[key] = val
    return out
