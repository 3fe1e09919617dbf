"""Formal WKB data: characteristic roots, their recursion and derived series.

The equation is ``h^2 psi'' + p h psi' + q psi = 0`` with ``p`` and ``q``
polynomial in ``h``. Formal solutions ``exp(-(1/h) int s)`` correspond to
formal solutions ``s = sum s^(k) h^k`` of the Riccati equation
``h s' = s^2 - p s + q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .coeffield import ExprFunction, FieldElement, RationalFunction

__all__ = [
    "ProblemSpec",
    "DegenerateDiscriminantError",
    "FormalRoots",
    "FormalWKB",
    "GevreyFit",
    "characteristic_data",
    "wkb_recursion",
    "riccati_residual",
    "odd_even",
    "even_part_residual",
    "formal_borel",
    "formal_wkb",
    "gevrey_probe",
    "series_exp",
    "series_log1p",
]


class DegenerateDiscriminantError(ValueError):
    """Raised when ``D0 = p0^2 - 4 q0`` vanishes identically."""


def _as_coeff(c, backend=RationalFunction):
    if isinstance(c, (RationalFunction, ExprFunction)):
        return c
    return backend.constant(c)


@dataclass
class ProblemSpec:
    """Coefficients ``p = sum p_k h^k`` and ``q = sum q_k h^k``.

    ``period`` marks an ``x``-periodic problem (a cylinder such as the
    Mathieu equation); ``critical_points`` may list finite critical points
    for coefficient backends whose zeros are not found automatically.
    """

    p: list
    q: list
    name: str = "custom"
    period: complex | None = None
    critical_points: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        backend = ExprFunction if any(isinstance(c, ExprFunction) for c in [*self.p, *self.q]) else RationalFunction
        p = [_as_coeff(c, backend) for c in self.p] or [backend.constant(0)]
        q = [_as_coeff(c, backend) for c in self.q] or [backend.constant(0)]
        if backend is ExprFunction:
            p = [c if isinstance(c, ExprFunction) else ExprFunction.from_rational(c) for c in p]
            q = [c if isinstance(c, ExprFunction) else ExprFunction.from_rational(c) for c in q]
        self.p, self.q = p, q
        self.backend = backend

    @property
    def is_rational(self) -> bool:
        return self.backend is RationalFunction

    def p_k(self, k: int):
        return self.p[k] if k < len(self.p) else self.backend.constant(0)

    def q_k(self, k: int):
        return self.q[k] if k < len(self.q) else self.backend.constant(0)

    @property
    def h_degree(self) -> int:
        return max(len(self.p), len(self.q)) - 1

    @property
    def d0(self):
        p0 = self.p_k(0)
        return p0 * p0 - self.q_k(0) * 4

    def p_star(self) -> list:
        """``p_*`` as an h-polynomial: ``p = p0 + p1 h + p_* h^2``."""
        return [self.p_k(k) for k in range(2, len(self.p))]

    def q_star(self) -> list:
        return [self.q_k(k) for k in range(2, len(self.q))]

    def p_value(self, x, hbar):
        return sum(np.asarray(c(x), dtype=complex) * hbar**k for k, c in enumerate(self.p))

    def q_value(self, x, hbar):
        return sum(np.asarray(c(x), dtype=complex) * hbar**k for k, c in enumerate(self.q))

    def dp_value(self, x, hbar):
        return sum(np.asarray(c.derivative()(x), dtype=complex) * hbar**k for k, c in enumerate(self.p))

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "p": [str(c) for c in self.p],
            "q": [str(c) for c in self.q],
            "D0": str(self.d0),
            "period": None if self.period is None else complex(self.period).real,
            **self.meta,
        }


def characteristic_data(spec: ProblemSpec):
    """Return ``(D0, lambda_plus, lambda_minus)`` with ``lambda_pm = (p0 +- sqrt(D0))/2``."""
    d0 = spec.d0
    if d0.is_zero():
        raise DegenerateDiscriminantError(f"D0 = p0^2 - 4 q0 vanishes identically for {spec.name}")
    half = Fraction(1, 2)
    p0 = spec.p_k(0)
    lam_p = FieldElement(p0 * half, d0.constant(half), d0)
    lam_m = FieldElement(p0 * half, d0.constant(-half), d0)
    return d0, lam_p, lam_m


@dataclass
class FormalRoots:
    """Coefficients ``s_pm^(0..K)`` of the two formal characteristic roots."""

    spec: ProblemSpec
    order: int
    plus: list
    minus: list

    def coeffs(self, sign: int) -> list:
        return self.plus if sign > 0 else self.minus

    @property
    def d0(self):
        return self.plus[0].d0

    def to_json(self) -> dict:
        return {
            "problem": self.spec.name,
            "order": self.order,
            "D0": str(self.d0),
            "plus": [c.to_json() for c in self.plus],
            "minus": [c.to_json() for c in self.minus],
        }


def wkb_recursion(spec: ProblemSpec, K: int = 12) -> FormalRoots:
    """Solve the Riccati recursion exactly through order ``K``.

    ``s^(k) = (+-1/sqrt(D0)) (d/dx s^(k-1) - sum' s^(k1) s^(k2)
    + sum' p_k1 s^(k2) - q_k)``.
    """
    if K < 0:
        raise ValueError("order K must be non-negative")
    d0, lam_p, lam_m = characteristic_data(spec)
    inv_sqrt = FieldElement(d0.constant(0), d0.inverse(), d0)  # 1/sqrt(D0) = sqrt(D0)/D0
    out = {}
    for sign, lam in ((1, lam_p), (-1, lam_m)):
        factor = inv_sqrt if sign > 0 else -inv_sqrt
        s = [lam]
        for k in range(1, K + 1):
            acc = s[k - 1].derivative()
            for k1 in range(1, k):
                acc = acc - s[k1] * s[k - k1]
            for k2 in range(0, k):
                pk = spec.p_k(k - k2)
                if not pk.is_zero():
                    acc = acc + s[k2] * pk
            qk = spec.q_k(k)
            if not qk.is_zero():
                acc = acc - qk
            s.append(factor * acc)
        out[sign] = s
    return FormalRoots(spec, K, out[1], out[-1])


def riccati_residual(roots: FormalRoots, sign: int) -> list:
    """Coefficients of ``h s' - (s^2 - p s + q)`` for the truncated series, orders 0..K."""
    s = roots.coeffs(sign)
    spec = roots.spec
    K = roots.order
    res = []
    for k in range(K + 1):
        acc = FieldElement.lift(0, roots.d0)
        if k >= 1:
            acc = acc + s[k - 1].derivative()
        for k1 in range(k + 1):
            acc = acc - s[k1] * s[k - k1]
        for k1 in range(k + 1):
            pk = spec.p_k(k1)
            if not pk.is_zero():
                acc = acc + s[k - k1] * pk
        acc = acc - spec.q_k(k)
        res.append(acc)
    return res


def odd_even(roots: FormalRoots):
    """Return ``(s_od, s_ev)`` with ``s_od = (s+ - s-)/2`` and ``s_ev = (s+ + s-)/2``."""
    half = Fraction(1, 2)
    od = [(a - b) * half for a, b in zip(roots.plus, roots.minus)]
    ev = [(a + b) * half for a, b in zip(roots.plus, roots.minus)]
    return od, ev


def series_log1p(u: Sequence) -> list:
    """Coefficients of ``log(1 + u)`` for a series ``u`` with ``u[0] == 0``."""
    n = len(u)
    out = [u[0] * 0 for _ in range(n)]
    for m in range(1, n):
        acc = u[m] * m
        for k in range(1, m):
            acc = acc - out[k] * (u[m - k] * k)
        out[m] = acc * Fraction(1, m)
    return out


def series_exp(a: Sequence) -> list:
    """Coefficients of ``exp(sum a_k h^k)``.

    Uses ``n e_n = sum_{k=1..n} k a_k e_{n-k}`` with ``e_0 = exp(a_0)``;
    works for numpy arrays of coefficients (pointwise in x).
    """
    n = len(a)
    e = [np.exp(a[0])]
    for m in range(1, n):
        acc = 0
        for k in range(1, m + 1):
            acc = acc + k * a[k] * e[m - k]
        e.append(acc / m)
    return e


def even_part_residual(roots: FormalRoots) -> list:
    """Coefficients of ``s_ev - (h/2) d/dx log s_od - p/2`` through order K.

    Subtracting the two Riccati equations gives ``h s_od' = 2 s_od s_ev - p s_od``,
    so every coefficient vanishes.
    """
    od, ev = odd_even(roots)
    K = roots.order
    half = Fraction(1, 2)
    u = [FieldElement.lift(0, roots.d0)] + [c / od[0] for c in od[1:]]
    log_u = series_log1p(u)
    # h d/dx log s_od has h^k coefficient d/dx of (log s_od)_(k-1)
    log_od_prime = [od[0].derivative() / od[0]] + [c.derivative() for c in log_u[1:]]
    res = []
    for k in range(K + 1):
        acc = ev[k] - roots.spec.p_k(k) * half
        if k >= 1:
            acc = acc - log_od_prime[k - 1] * half
        res.append(acc)
    return res


def formal_borel(roots: FormalRoots, sign: int) -> list:
    """Taylor coefficients of ``sigma_hat(x, xi) = sum s^(k+2) xi^k / k!``."""
    s = roots.coeffs(sign)
    if roots.order < 2:
        raise ValueError("formal Borel transform needs order K >= 2")
    return [s[k + 2] * Fraction(1, math.factorial(k)) for k in range(roots.order - 1)]


def evaluate_coeffs(coeffs: Sequence[FieldElement], x, root) -> np.ndarray:
    """Evaluate field elements at points ``x`` given tracked values of sqrt(D0)."""
    return np.array([c.evaluate_with_root(x, root) for c in coeffs])


@dataclass
class FormalWKB:
    """Coefficients ``Psi^(n)(x)`` on a grid, plus the exponent ``Phi_pm(x)``."""

    sign: int
    x0: complex
    x: np.ndarray
    exponent: np.ndarray  # Phi_pm(x) = int_{x0}^x lambda_pm
    integrals: np.ndarray  # a_k(x) = -int_{x0}^x s^(k+1), shape (K, len(x))
    psi: np.ndarray  # Psi^(n)(x), shape (K, len(x))

    @property
    def order(self) -> int:
        return self.psi.shape[0]

    def partial_sum(self, hbar, n: int) -> np.ndarray:
        """``sum_{k<n} Psi^(k)(x) hbar^k``."""
        return sum(self.psi[k] * hbar**k for k in range(n))


def formal_wkb(roots: FormalRoots, frame, xgrid, sign: int = 1, *, rtol: float = 1e-10) -> FormalWKB:
    """Formal WKB solution normalised at ``frame.x0`` on the points ``xgrid``.

    Each ``-int_{x0}^x s^(k+1)`` is a straight-segment quadrature with the
    square-root branch continued from ``x0``; the series exponential is then
    taken coefficientwise.
    """
    s = roots.coeffs(sign)
    K = roots.order
    xgrid = np.atleast_1d(np.asarray(xgrid, dtype=complex))
    coeffs = s[:K + 1]
    ints = np.zeros((K + 1, len(xgrid)), dtype=complex)
    for j, x in enumerate(xgrid):
        ints[:, j] = frame.integrate_fields(coeffs, x, rtol=rtol)
    exponent = ints[0]
    a = [-ints[k + 1] for k in range(K)]
    psi = np.array(series_exp(a)) if K else np.zeros((0, len(xgrid)))
    return FormalWKB(sign, complex(frame.x0), xgrid, exponent, np.array(a), psi)


@dataclass
class GevreyFit:
    sup_norms: np.ndarray
    log_C: float
    log_M: float
    residuals: np.ndarray
    used: np.ndarray  # orders included in the fit

    @property
    def M(self) -> float:
        return float(np.exp(self.log_M))

    @property
    def C(self) -> float:
        return float(np.exp(self.log_C))

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if len(self.residuals) else 0.0


def gevrey_probe(wkb: FormalWKB, mask=None, *, kmin: int = 1, floor: float = 1e-300) -> GevreyFit:
    """Least-squares fit of ``log(sup|Psi^(k)|/k!) ~ log C + k log M``.

    ``mask`` selects the subset of grid points standing in for the compact
    set; orders whose sup-norm is below ``floor`` are excluded.
    """
    psi = wkb.psi if mask is None else wkb.psi[:, mask]
    sup = np.max(np.abs(psi), axis=1) if psi.size else np.zeros(wkb.order)
    ks = np.arange(len(sup))
    use = (ks >= kmin) & (sup > floor)
    if use.sum() < 2:
        return GevreyFit(sup, float("nan"), float("nan"), np.array([]), ks[use])
    y = np.log(sup[use]) - np.array([math.lgamma(k + 1) for k in ks[use]])
    A = np.vstack([np.ones(use.sum()), ks[use]]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return GevreyFit(sup, float(coef[0]), float(coef[1]), resid, ks[use])
