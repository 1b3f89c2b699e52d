"""De-singularity subgradient, optimality certificates and descent directions.

On the singular set the gradient formula breaks down because some terms carry
``0 ** (p - 2)``. Dropping exactly those terms, dimension by dimension, gives
the de-singularity subgradient. Together with the per-case correction terms
(a box for p = q = 1, a dual-norm ball for q = 1 at a data point) it describes
the whole subdifferential, which is what the certificate checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    DEFAULT_EPS_SING,
    ProblemInstance,
    SingularityProfile,
    _as_point,
    gradient,
    lp_norm,
    lp_norms,
    singularity_profile,
)
from .exceptions import AtMinimum

DEFAULT_GRAD_TOL = 1e-10

NONSINGULAR = "nonsingular_gradient"
P1Q1_BOX = "p1q1_box"
Q1_INTERIOR = "q1_interior_singular"
Q1_DATA_POINT = "q1_at_data_point"
GENERAL_PQ = "general_pq"


@dataclass(frozen=True)
class OptimalityCertificate:
    case: str
    desing_subgrad: np.ndarray
    is_minimum: bool
    bounds_a: Optional[np.ndarray] = None
    conj_norm: Optional[float] = None
    threshold: Optional[float] = None
    coincident_point: Optional[int] = None

    def representative_subgradient(self) -> np.ndarray:
        """One member of the subdifferential.

        In the box case this is the minimum-norm element
        ``sign(g) * max(|g| - a, 0)``; in the ball case it is ``g`` itself
        (the ball centre). Elsewhere the subdifferential is a single vector.
        """
        g = self.desing_subgrad
        if self.case == P1Q1_BOX:
            return np.sign(g) * np.maximum(np.abs(g) - self.bounds_a, 0.0)
        return g.copy()


def _profile(instance, y, profile, eps_sing):
    if profile is None:
        profile = singularity_profile(instance, y, eps_sing)
    return profile


def desing_value(instance: ProblemInstance, y, eps_sing: float = DEFAULT_EPS_SING,
                 profile: Optional[SingularityProfile] = None) -> float:
    """Cost with every matched coordinate term removed."""
    y = _as_point(instance, y)
    prof = _profile(instance, y, profile, eps_sing)
    a = np.where(prof.mask, 0.0, np.abs(y - instance.points))
    norms = lp_norms(a, instance.p)
    return float(np.dot(instance.weights, norms ** instance.q))


def desing_subgradient(instance: ProblemInstance, y, eps_sing: float = DEFAULT_EPS_SING,
                       profile: Optional[SingularityProfile] = None) -> np.ndarray:
    """Gradient formula summed, for each dimension t, over points not in V_t.

    Coincides with :func:`gradient` off the singular set.
    """
    y = _as_point(instance, y)
    prof = _profile(instance, y, profile, eps_sing)
    p, q = instance.p, instance.q
    diff = y - instance.points
    norms = lp_norms(diff, p)
    live = ~prof.mask.all(axis=1)
    if np.any(live & (norms == 0)):
        raise FloatingPointError("zero distance on a row that is not fully excluded")
    coef = np.zeros(instance.m)
    coef[live] = q * instance.weights[live] * norms[live] ** (q - p)
    terms = np.sign(diff) * np.abs(diff) ** (p - 1)
    terms[prof.mask] = 0.0
    return coef @ terms


def conjugate_norm(v, p) -> float:
    """||v||_r with 1/r + 1/p = 1."""
    if p == 1.0:
        return float(np.abs(np.asarray(v, dtype=float)).max(initial=0.0))
    return lp_norm(v, p / (p - 1.0))


def certify(instance: ProblemInstance, y, grad_tol: float = DEFAULT_GRAD_TOL,
            eps_sing: float = DEFAULT_EPS_SING,
            profile: Optional[SingularityProfile] = None) -> OptimalityCertificate:
    """Decide whether ``y`` minimizes the cost, using the subdifferential case
    that applies at ``y``."""
    if grad_tol <= 0:
        raise ValueError("grad_tol must be > 0")
    y = _as_point(instance, y)
    prof = _profile(instance, y, profile, eps_sing)
    p, q = instance.p, instance.q

    if not prof.is_singular:
        g = gradient(instance, y)
        return OptimalityCertificate(NONSINGULAR, g, bool(np.linalg.norm(g) <= grad_tol))

    g = desing_subgradient(instance, y, profile=prof)
    if p == 1.0:
        # q <= p forces q == 1 here
        a = prof.mask.T.astype(float) @ instance.eta
        return OptimalityCertificate(P1Q1_BOX, g, bool(np.all(np.abs(g) <= a)), bounds_a=a,
                                     coincident_point=prof.coincident_point)
    if q == 1.0 and prof.coincident_point is not None:
        l = prof.coincident_point
        cn = conjugate_norm(g, p)
        thr = float(instance.eta[l])
        return OptimalityCertificate(Q1_DATA_POINT, g, bool(cn <= thr), conj_norm=cn,
                                     threshold=thr, coincident_point=l)
    case = Q1_INTERIOR if q == 1.0 else GENERAL_PQ
    return OptimalityCertificate(case, g, bool(np.linalg.norm(g) <= grad_tol),
                                 coincident_point=prof.coincident_point)


def signed_power(w, e: float) -> np.ndarray:
    """Element-wise ``sign(w) * |w| ** e``."""
    if not e > 0:
        raise ValueError("exponent must be > 0")
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.abs(w) ** e


def descent_direction(instance: ProblemInstance, y, cert: OptimalityCertificate) -> np.ndarray:
    """Direction D such that cost(y - lam * D) < cost(y) for small lam > 0.

    At a data point with q = 1 < p the subgradient is mapped through the
    signed power r/p = 1/(p - 1), which aligns it with the dual-norm ball.
    For p = q = 1 the components already inside their box ``|g_t| <= a_t``
    are zeroed: moving along them can only increase the cost.
    """
    if cert.is_minimum:
        raise AtMinimum("the certificate marks this point as a minimum")
    g = cert.desing_subgrad
    if cert.case == Q1_DATA_POINT:
        return signed_power(g, 1.0 / (instance.p - 1.0))
    if cert.case == P1Q1_BOX:
        return np.where(np.abs(g) > cert.bounds_a, g, 0.0)
    return g.copy()


def directional_derivative(instance: ProblemInstance, y, direction, eps_sing: float = 0.0) -> float:
    """One-sided derivative of the cost at ``y`` along ``direction``.

    Uses the exact formula: the de-singularity part plus the nonsmooth
    contribution of matched coordinates (only nonzero when p = 1, or when
    q = 1 at a data point).
    """
    y = _as_point(instance, y)
    z = np.asarray(direction, dtype=float)
    prof = singularity_profile(instance, y, eps_sing)
    g = desing_subgradient(instance, y, profile=prof)
    val = float(g @ z)
    p, q = instance.p, instance.q
    if p == 1.0:
        a = prof.mask.T.astype(float) @ instance.eta
        val += float(a @ np.abs(z))
    elif q == 1.0 and prof.coincident_point is not None:
        val += float(instance.eta[prof.coincident_point] * lp_norm(z, p))
    elif not math.isfinite(val):
        raise FloatingPointError("non-finite directional derivative")
    return val
