"""Independent reference minimizers used to check the solver.

None of these routines share code paths with the Weiszfeld/de-singularity
iteration beyond the cost function itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ProblemInstance, _as_point, cost, lp_norms
from .exceptions import EmptyInput, HitDataPoint, SingularStencil, WrongParams


@dataclass(frozen=True)
class GridSearchSpec:
    lower: np.ndarray
    upper: np.ndarray
    points_per_dim: int = 41
    refine_levels: int = 6
    shrink: float = 0.3

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("upper must exceed lower componentwise")
        if self.points_per_dim < 3 or self.refine_levels < 1 or not 0 < self.shrink < 1:
            raise ValueError("need points_per_dim >= 3, refine_levels >= 1, 0 < shrink < 1")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def around(cls, instance: ProblemInstance, inflate=0.5, **kw):
        """Box spanning the data, inflated by ``inflate`` of its width per side."""
        lo = instance.points.min(axis=0)
        hi = instance.points.max(axis=0)
        width = np.maximum(hi - lo, 1.0)
        return cls(lo - inflate * width, hi + inflate * width, **kw)


def weighted_coordinate_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    v = np.asarray(values, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if v.size == 0:
        raise EmptyInput("values must be nonempty")
    if w.shape != v.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and match values")
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(v[order][k])


def l1_median_oracle(instance: ProblemInstance) -> np.ndarray:
    """Exact minimizer for p = q = 1, where the cost separates per coordinate."""
    if instance.p != 1.0 or instance.q != 1.0:
        raise WrongParams("l1_median_oracle requires p = q = 1")
    return np.array([weighted_coordinate_median(instance.points[:, t], instance.weights)
                     for t in range(instance.d)])


def _costs(instance, Y):
    # Y: (n, d) candidate points
    diff = Y[:, None, :] - instance.points[None, :, :]
    norms = lp_norms(diff, instance.p, axis=-1)
    return (norms ** instance.q) @ instance.weights


def grid_refine_minimize(instance: ProblemInstance, spec: Optional[GridSearchSpec] = None,
                         chunk: int = 200_000):
    """Brute-force grid search, recentred on the best point and shrunk each level."""
    if spec is None:
        spec = GridSearchSpec.around(instance)
    center = 0.5 * (spec.lower + spec.upper)
    half = 0.5 * (spec.upper - spec.lower)
    best_y, best_c = None, np.inf
    offsets = np.linspace(-1.0, 1.0, spec.points_per_dim)
    for _ in range(spec.refine_levels):
        axes = [center[t] + half[t] * offsets for t in range(instance.d)]
        grid = np.array(list(itertools.product(*axes))) if instance.d > 1 else axes[0][:, None]
        for s in range(0, grid.shape[0], chunk):
            block = grid[s:s + chunk]
            vals = _costs(instance, block)
            j = int(np.argmin(vals))
            if vals[j] < best_c:
                best_c, best_y = float(vals[j]), block[j].copy()
        center = best_y
        half = half * spec.shrink
    return best_y, best_c


def l2_weiszfeld(points, weights=None, y0=None, tol=1e-10, max_iter=10_000) -> np.ndarray:
    """Classic Euclidean Weiszfeld iteration (p = 2, q = 1).

    Raises :class:`HitDataPoint` if an iterate lands on a data point; the
    caller decides how to restart.
    """
    X = np.asarray(points, dtype=float)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if X.shape[0] == 1:
        return X[0].copy()
    y = X.mean(axis=0) if y0 is None else np.asarray(y0, dtype=float).copy()
    for _ in range(max_iter):
        dist = np.linalg.norm(X - y, axis=1)
        hit = np.flatnonzero(dist == 0)
        if hit.size:
            raise HitDataPoint(f"iterate coincides with data point {hit[0]}", index=int(hit[0]))
        coef = w / dist
        y_new = coef @ X / coef.sum()
        if np.linalg.norm(y_new - y) <= tol * max(np.linalg.norm(y), 1e-300):
            return y_new
        y = y_new
    return y


def l2_cost(points, weights, y) -> float:
    X = np.asarray(points, dtype=float)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    return float(w @ np.linalg.norm(X - np.asarray(y, dtype=float), axis=1))


def finite_diff_gradient(instance: ProblemInstance, y, h: float = 1e-6) -> np.ndarray:
    """Central differences of the cost; refuses stencils that touch or cross a
    singular hyperplane."""
    y = _as_point(instance, y)
    X = instance.points
    g = np.empty(instance.d)
    for t in range(instance.d):
        lo, hi = y[t] - h, y[t] + h
        col = X[:, t]
        if np.any((col >= lo) & (col <= hi)):
            raise SingularStencil(f"stencil in dimension {t} meets a singular hyperplane")
        e = np.zeros(instance.d)
        e[t] = h
        g[t] = (cost(instance, y + e) - cost(instance, y - e)) / (2 * h)
    return g
