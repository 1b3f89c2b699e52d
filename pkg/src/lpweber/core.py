"""Problem representation, cost and gradient, and singular-set detection.

The objective is the weighted sum of q-th powered l_p distances

    C(y) = sum_i xi_i * ||y - x_i||_p ** q,    1 <= q <= p < 2.

For p < 2 the gradient formula contains |y_t - x_it| ** (p - 2), which is
undefined whenever some coordinate of ``y`` coincides with the same coordinate
of a data point. That union of axis-aligned hyperplanes is the singular set.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import (
    CollinearWarning,
    DimensionMismatch,
    EmptyInstance,
    NonPositiveWeight,
    ParamOutOfRange,
    ParseError,
    SingularPoint,
)

DEFAULT_EPS_SING = 1e-12


@dataclass(frozen=True)
class PowerNormParams:
    """Norm exponent ``p``, distance power ``q`` and the conjugate ``r`` of ``p``."""

    p: float
    q: float

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if not (math.isfinite(p) and math.isfinite(q)):
            raise ParamOutOfRange(f"p and q must be finite, got p={p}, q={q}")
        if not 1.0 <= p < 2.0:
            raise ParamOutOfRange(f"p must satisfy 1 <= p < 2, got p={p}")
        if not 1.0 <= q <= p:
            raise ParamOutOfRange(f"q must satisfy 1 <= q <= p, got q={q}, p={p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def r(self) -> float:
        if self.p == 1.0:
            return math.inf
        return self.p / (self.p - 1.0)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemInstance:
    points: np.ndarray
    weights: np.ndarray
    params: PowerNormParams
    eta: np.ndarray
    collinear: bool = False

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def q(self) -> float:
        return self.params.q


def _merge_duplicates(points, weights):
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    if uniq.shape[0] == points.shape[0]:
        return points, weights
    inverse = inverse.reshape(-1)
    # keep first-occurrence order so that x_1 stays x_1
    first = np.full(uniq.shape[0], points.shape[0])
    np.minimum.at(first, inverse, np.arange(points.shape[0]))
    order = np.argsort(first)
    merged_w = np.zeros(uniq.shape[0])
    np.add.at(merged_w, inverse, weights)
    return uniq[order], merged_w[order]


def _is_collinear(points):
    m, d = points.shape
    if m < 2 or d < 2:
        return False
    centered = points - points.mean(axis=0)
    scale = max(1.0, np.abs(points).max())
    return np.linalg.matrix_rank(centered, tol=1e-12 * scale * max(m, d)) <= 1


def build_instance(points, weights=None, p=1.0, q=1.0) -> ProblemInstance:
    """Validate data and parameters and return an immutable instance.

    Points that coincide exactly are merged and their weights summed, which
    leaves the objective unchanged. Collinear data triggers a
    :class:`CollinearWarning` and sets ``instance.collinear``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyInstance("at least one data point of dimension >= 1 is required")
    if not np.all(np.isfinite(X)):
        raise ValueError("data points must be finite")
    if weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} points but {w.shape[0]} weights")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise NonPositiveWeight("all weights must be finite and > 0")
    params = PowerNormParams(p, q)

    X, w = _merge_duplicates(X, w)
    collinear = _is_collinear(X)
    if collinear:
        warnings.warn("data points are collinear; minimizer may not be unique",
                      CollinearWarning, stacklevel=2)
    eta = w ** (1.0 / params.q)
    return ProblemInstance(_readonly(X), _readonly(w), params, _readonly(eta), collinear)


def _as_point(instance, y):
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != instance.d:
        raise DimensionMismatch(f"expected a point of dimension {instance.d}, got {y.shape[0]}")
    return y


def lp_norms(diff, p, axis=-1):
    """Row-wise l_p norms, scaled to avoid under/overflow."""
    a = np.abs(diff)
    scale = a.max(axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    out = (np.sum((a / safe) ** p, axis=axis, keepdims=True)) ** (1.0 / p) * scale
    return np.squeeze(out, axis=axis)


def lp_norm(v, p) -> float:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.abs(v).max())
    return float(lp_norms(v[None, :], p)[0])


def cost(instance: ProblemInstance, y) -> float:
    """C(y) = sum_i xi_i ||y - x_i||_p^q."""
    y = _as_point(instance, y)
    norms = lp_norms(y - instance.points, instance.p)
    return float(np.dot(instance.weights, norms ** instance.q))


def gradient(instance: ProblemInstance, y) -> np.ndarray:
    """Gradient of the cost at a point off the singular set.

    Raises :class:`SingularPoint` if any coordinate of ``y`` equals the same
    coordinate of a data point.
    """
    y = _as_point(instance, y)
    diff = y - instance.points
    if np.any(diff == 0):
        raise SingularPoint("gradient is undefined on the singular set; "
                            "use desing_subgradient instead")
    p, q = instance.p, instance.q
    coef = q * instance.weights * lp_norms(diff, p) ** (q - p)
    # |d|^(p-2) * d == sign(d) * |d|^(p-1)
    return coef @ (np.sign(diff) * np.abs(diff) ** (p - 1))


@dataclass(frozen=True)
class SingularityProfile:
    """Coordinate matches between an iterate and the data points.

    ``mask[i, t]`` is True when dimension ``t`` of the iterate matches data
    point ``i``; ``U`` reads the mask by rows and ``V`` by columns. Indices are
    zero-based.
    """

    mask: np.ndarray
    coincident_point: Optional[int] = None
    U: tuple = field(init=False, repr=False)
    V: tuple = field(init=False, repr=False)

    def __post_init__(self):
        m = self.mask
        object.__setattr__(self, "U", tuple(frozenset(np.flatnonzero(row).tolist()) for row in m))
        object.__setattr__(self, "V", tuple(frozenset(np.flatnonzero(col).tolist()) for col in m.T))

    @property
    def is_singular(self) -> bool:
        return bool(self.mask.any())

    @property
    def singular_dims(self) -> frozenset:
        return frozenset(np.flatnonzero(self.mask.any(axis=0)).tolist())


def singularity_profile(instance: ProblemInstance, y, eps_sing: float = DEFAULT_EPS_SING) -> SingularityProfile:
    """Locate ``y`` relative to the singular hyperplanes.

    Dimension ``t`` matches point ``i`` when
    ``|y_t - x_it| <= eps_sing * max(1, |x_it|)``; ``eps_sing=0`` is exact
    equality.
    """
    if eps_sing < 0:
        raise ValueError("eps_sing must be >= 0")
    y = _as_point(instance, y)
    X = instance.points
    mask = np.abs(y - X) <= eps_sing * np.maximum(1.0, np.abs(X))
    mask.setflags(write=False)
    full = np.flatnonzero(mask.all(axis=1))
    coincident = int(full[0]) if full.size else None
    return SingularityProfile(mask, coincident)


@dataclass(frozen=True)
class IterateState:
    y: np.ndarray
    cost: float
    k: int
    singular: SingularityProfile
    step_kind: str  # "initial", "weiszfeld" or "singular_descent"


def load_instance_csv(path, p, q) -> ProblemInstance:
    """Read an instance file with header ``w,x1,...,xd``."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file", row=0)
        if len(header) < 2 or header[0].strip().lower() != "w":
            raise ParseError(f"{path}: header must be 'w,x1,...,xd'", row=0)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(row)} fields, "
                                 f"expected {len(header)}", row=lineno)
            vals = []
            for col, cell in enumerate(row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: cannot parse {cell!r} at row {lineno}, "
                                     f"column {col}", row=lineno, col=col) from None
            rows.append(vals)
    if not rows:
        raise EmptyInstance(f"{path}: no data rows")
    arr = np.array(rows)
    return build_instance(arr[:, 1:], arr[:, 0], p, q)


def write_instance_csv(path, points, weights=None):
    X = np.asarray(points, dtype=float)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"] + [f"x{t + 1}" for t in range(X.shape[1])])
        for wi, xi in zip(w, X):
            writer.writerow([repr(float(wi))] + [repr(float(v)) for v in xi])
