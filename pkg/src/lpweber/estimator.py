"""scikit-learn style wrapper around :func:`lpweber.solver.solve`."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import _check_sample_weight, check_array, check_is_fitted

from .core import build_instance, cost, lp_norms
from .exceptions import CollinearWarning
from .solver import SolverConfig, solve


class LpMedian(TransformerMixin, BaseEstimator):
    """Weighted q-th-powered l_p median of the rows of ``X``.

    ``fit`` locates the median; ``transform`` returns each row's l_p
    distance to it, so the estimator can sit inside a pipeline as a
    robust-centre feature.

    Parameters
    ----------
    p, q : float
        Norm exponent and distance power, ``1 <= q <= p < 2``.
    init : {"mean", "first"} or array-like
        Starting point of the iteration.
    rho, tol, tol2, grad_tol, max_iter, max_linesearch, eps_sing
        Passed to :class:`lpweber.solver.SolverConfig`.
    """

    def __init__(self, p=1.5, q=1.0, init="mean", rho=0.1, tol=1e-4, tol2=1e-14,
                 grad_tol=1e-10, max_iter=1000, max_linesearch=200, eps_sing=1e-12):
        self.p = p
        self.q = q
        self.init = init
        self.rho = rho
        self.tol = tol
        self.tol2 = tol2
        self.grad_tol = grad_tol
        self.max_iter = max_iter
        self.max_linesearch = max_linesearch
        self.eps_sing = eps_sing

    def _config(self):
        return SolverConfig(rho=self.rho, tol=self.tol, tol2=self.tol2, grad_tol=self.grad_tol,
                            max_iter=self.max_iter, max_linesearch=self.max_linesearch,
                            eps_sing=self.eps_sing)

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        w = _check_sample_weight(sample_weight, X, dtype=np.float64)
        keep = w > 0
        if not np.any(keep):
            raise ValueError("at least one sample weight must be positive")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CollinearWarning)
            inst = build_instance(X[keep], w[keep], self.p, self.q)
        if isinstance(self.init, str):
            if self.init == "mean":
                y0 = np.average(X[keep], axis=0, weights=w[keep])
            elif self.init == "first":
                y0 = X[keep][0]
            else:
                raise ValueError(f"init must be 'mean', 'first' or an array, got {self.init!r}")
        else:
            y0 = np.asarray(self.init, dtype=float)
        res = solve(inst, y0, self._config())
        self.instance_ = inst
        self.result_ = res
        self.location_ = res.minimizer
        self.cost_ = res.cost
        self.n_iter_ = res.iterations
        self.status_ = res.status
        self.singular_hits_ = res.singular_hits
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "location_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return lp_norms(X - self.location_, self.p)[:, None]

    def score(self, X, y=None, sample_weight=None):
        """Negative objective at the fitted location (higher is better)."""
        check_is_fitted(self, "location_")
        X = check_array(X, dtype=np.float64)
        w = _check_sample_weight(sample_weight, X, dtype=np.float64)
        keep = w > 0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CollinearWarning)
            inst = build_instance(X[keep], w[keep], self.p, self.q)
        return -cost(inst, self.location_)
