"""scikit-learn style wrapper around the resummation pipeline.

``fit`` takes a problem (a catalog name or a ProblemSpec) rather than a
data matrix; ``predict`` maps rows ``(x, hbar)`` to ``(psi_plus, psi_minus)``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .formal import ProblemSpec, wkb_recursion
from .laplace import ExactSolution
from .problems import builtin, catalog_entry

__all__ = ["ExactWKBEstimator"]


class ExactWKBEstimator(BaseEstimator):
    def __init__(self, x0=None, theta: float = 0.0, theta_minus: float | None = None, order: int = 2,
                 xi_n: int = 160, xi_factor: float = 35.0, xi_max: float | None = None):
        self.x0 = x0
        self.theta = theta
        self.theta_minus = theta_minus
        self.order = order
        self.xi_n = xi_n
        self.xi_factor = xi_factor
        self.xi_max = xi_max

    def fit(self, problem, y=None):
        if isinstance(problem, str):
            entry = catalog_entry(problem)
            spec = builtin(problem)
            x0 = entry.x0 if self.x0 is None else self.x0
        elif isinstance(problem, ProblemSpec):
            spec = problem
            if self.x0 is None:
                raise ValueError("x0 is required for a custom problem")
            x0 = self.x0
        else:
            raise TypeError("fit expects a catalog name or a ProblemSpec")
        self.spec_ = spec
        self.roots_ = wkb_recursion(spec, max(self.order, 2))
        self.solution_ = ExactSolution(spec, x0, theta=self.theta, theta_minus=self.theta_minus, roots=self.roots_,
                                       n=self.xi_n, xi_factor=self.xi_factor, xi_max=self.xi_max)
        self.x0_ = complex(x0)
        return self

    def predict(self, X) -> np.ndarray:
        """Rows ``(x, hbar)`` -> rows ``(psi_plus, psi_minus)``.

        Points sharing an ``hbar`` and lying on one ray from ``x0`` reuse a
        single cached segment.
        """
        check_is_fitted(self, "solution_")
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if X.shape[1] != 2:
            raise ValueError("X must have columns (x, hbar)")
        out = np.zeros((len(X), 2), dtype=complex)
        for hb in np.unique(X[:, 1]):
            idx = np.nonzero(X[:, 1] == hb)[0]
            xs = X[idx, 0]
            d = xs - self.x0_
            far = xs[np.argmax(np.abs(d))]
            ray = far - self.x0_
            collinear = ray != 0 and np.all(np.abs((d / ray).imag) < 1e-12) and np.all((d / ray).real >= -1e-12)
            for col, alpha in enumerate((1, -1)):
                if collinear:
                    out[idx, col] = self.solution_.psi_on(alpha, xs, hb)
                else:
                    out[idx, col] = [self.solution_.psi(alpha, x, hb) for x in xs]
        return out
