"""Laplace resummation: exact characteristic roots, exact WKB solutions, monodromy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

from .borel import BorelField, exponential_type, solve_borel, standard_form
from .coeffield import FieldElement
from .formal import FormalRoots, ProblemSpec, characteristic_data, wkb_recursion
from .geometry import LiouvilleFrame

__all__ = [
    "BorelDiscError",
    "TailBoundError",
    "LaplaceValue",
    "filon_simpson_weights",
    "laplace_transform",
    "ExactRoot",
    "ExactSolution",
    "Monodromy",
    "laplace_root",
    "exact_wkb",
    "wronskian",
    "monodromy",
    "asymptotic_coefficients",
]


class BorelDiscError(ValueError):
    """hbar lies outside the Borel disc where the Laplace integral is trusted."""


class TailBoundError(ArithmeticError):
    """Truncating the Laplace integral at Xi leaves too large a tail; increase Xi."""


@dataclass
class LaplaceValue:
    value: complex
    tail_bound: float
    quad_error: float
    L: float
    A: float
    c: float

    @property
    def error_bound(self) -> float:
        return self.tail_bound + self.quad_error


_GL20 = np.polynomial.legendre.leggauss(20)


def filon_simpson_weights(n: int, h: float, kappa: complex) -> np.ndarray:
    """Weights ``w`` with ``sum w_k f(k h) ~ int_0^{n h} f(r) exp(-kappa r) dr``.

    ``f`` is replaced by its piecewise quadratic interpolant on panels of two
    steps and each panel is integrated exactly against the exponential
    (Gauss-Legendre on the smooth product, subdivided when the exponential
    varies quickly).  Reduces to composite Simpson for ``kappa = 0``.
    """
    if n % 2:
        raise ValueError("Filon-Simpson needs an even number of intervals")
    kappa = complex(kappa)
    sub = max(1, int(math.ceil(abs(kappa) * 2 * h / 10.0)))
    g, w = _GL20
    edges = np.linspace(0.0, 2.0, sub + 1)
    local = np.zeros(3, dtype=complex)
    for a, b in zip(edges[:-1], edges[1:]):
        u = a + 0.5 * (b - a) * (g + 1)  # in units of h
        ww = 0.5 * (b - a) * w * h
        e = np.exp(-kappa * h * u)
        basis = (0.5 * (u - 1) * (u - 2), -u * (u - 2), 0.5 * u * (u - 1))
        for m in range(3):
            local[m] += np.sum(ww * basis[m] * e)
    out = np.zeros(n + 1, dtype=complex)
    shift = np.exp(-kappa * h * np.arange(0, n, 2))
    for m in range(3):
        out[m:n + m:2][: len(shift)] += local[m] * shift
    return out


def laplace_transform(values, h: float, theta: float, hbar: complex, *, A: float | None = None,
                      L: float | None = None, delta_factor: float = 0.9, tol: float | None = None,
                      quad_error: float = 0.0) -> LaplaceValue:
    """``int_0^{infinity e^{i theta}} exp(-xi/hbar) f(xi) dxi`` from samples at ``xi_k = e^{i theta} k h``.

    ``(A, L)`` bound ``|f| <= A exp(L |xi|)`` beyond the grid; when omitted
    they are fitted from the samples.
    """
    values = np.asarray(values, dtype=complex)
    n = len(values) - 1
    if n % 2:
        values, n = values[:-1], n - 1
    hbar = complex(hbar)
    if hbar == 0:
        raise BorelDiscError("hbar = 0")
    rot = np.exp(1j * theta)
    kappa = rot / hbar
    c = kappa.real
    r = h * np.arange(n + 1)
    if A is None or L is None:
        A_fit, L_fit = exponential_type(r, values)
        A = A_fit if A is None else A
        L = L_fit if L is None else L
    if c <= 1e-12 * abs(kappa) or (L > 0 and c <= L / delta_factor):
        raise BorelDiscError(f"hbar={hbar} is outside the Borel disc Re(e^(i theta)/hbar) > "
                             f"{max(L, 0) / delta_factor:.4g} (got {c:.4g})")
    w = filon_simpson_weights(n, h, kappa)
    value = complex(rot * np.sum(w * values))
    Xi = n * h
    tail = 0.0 if A == 0 else float(A * math.exp((L - c) * Xi) / (c - L))
    if tol is not None and tail > tol:
        raise TailBoundError(f"Laplace tail bound {tail:.3g} exceeds {tol:.3g}; increase xi_max beyond {Xi:.4g}")
    return LaplaceValue(value, tail, quad_error, float(L), float(A), float(c))


# ---------------------------------------------------------------------------
# exact characteristic roots
# ---------------------------------------------------------------------------

class ExactRoot:
    """Resummed Riccati solution ``s_alpha = lambda_alpha + hbar S_alpha`` in direction ``theta``.

    ``S_alpha(x, hbar) = s^(1)(x) + L_theta[sigma_alpha](x, hbar)`` where
    ``sigma_alpha`` is solved on a flow grid based at ``x``.  The Borel grid
    length defaults to ``xi_factor |hbar| / cos(theta - arg hbar)`` so that the
    Laplace kernel has decayed by ``exp(-xi_factor)`` at its end.
    """

    def __init__(self, spec: ProblemSpec, roots: FormalRoots, frame: LiouvilleFrame, alpha: int, theta: float = 0.0,
                 *, n: int = 160, xi_factor: float = 35.0, xi_max: float | None = None, richardson: bool = True,
                 method: str = "march", delta_factor: float = 0.9, laplace_tol: float | None = None):
        self.spec, self.roots, self.frame = spec, roots, frame
        self.alpha, self.theta = alpha, float(theta)
        self.n = n + (n % 2)
        self.xi_factor, self.xi_max = xi_factor, xi_max
        self.richardson, self.method = richardson, method
        self.delta_factor, self.laplace_tol = delta_factor, laplace_tol
        self.coeffs = standard_form(spec, roots, alpha)
        self.lam = roots.coeffs(alpha)[0]
        self.s1 = roots.coeffs(alpha)[1]
        # no seed and no source: tau = 0 solves the integral equation
        self.trivial = self.coeffs.b0.is_zero() and not self.coeffs.has_beta0
        self._fields: dict = {}

    def grid_length(self, hbar) -> float:
        if self.xi_max is not None:
            return float(self.xi_max)
        hbar = complex(hbar)
        cosang = math.cos(self.theta - np.angle(hbar))
        if cosang <= 0:
            raise BorelDiscError(f"hbar={hbar} is not in the half plane of direction theta={self.theta}")
        return self.xi_factor * abs(hbar) / cosang

    def field(self, x, xi_max: float, root=None) -> BorelField:
        key = (complex(x), round(float(xi_max), 14), self.n)
        bf = self._fields.get(key)
        if bf is None:
            bf = solve_borel(self.coeffs, self.frame, x, self.alpha, self.theta, xi_max, self.n, root=root,
                             method=self.method, richardson=self.richardson)
            self._fields[key] = bf
        return bf

    def S(self, x, hbar, root=None) -> LaplaceValue:
        x = complex(x)
        root = self.frame.root_at(x) if root is None else complex(root)
        s1 = complex(self.s1.evaluate_with_root(x, root))
        if self.trivial:
            self.grid_length(hbar)  # same half-plane check as the general path
            c = (np.exp(1j * self.theta) / complex(hbar)).real
            return LaplaceValue(s1, 0.0, 0.0, 0.0, 0.0, c)
        bf = self.field(x, self.grid_length(hbar), root)
        lv = laplace_transform(bf.sigma_base, bf.h, self.theta, hbar, delta_factor=self.delta_factor,
                               tol=self.laplace_tol)
        # Richardson change of tau, carried through |int exp(-kappa r) dr| <= 1/c
        err = bf.report.get("richardson_delta", 0.0) * abs(root) / lv.c
        return LaplaceValue(s1 + lv.value, lv.tail_bound, float(err), lv.L, lv.A, lv.c)

    def s(self, x, hbar, root=None) -> complex:
        x = complex(x)
        root = self.frame.root_at(x) if root is None else complex(root)
        lam = complex(self.lam.evaluate_with_root(x, root))
        return lam + complex(hbar) * self.S(x, hbar, root).value


def laplace_root(root: ExactRoot, x, hbar):
    """``(S_alpha, s_alpha, tail bound)`` at ``(x, hbar)``."""
    r = root.frame.root_at(x)
    S = root.S(x, hbar, r)
    lam = complex(root.lam.evaluate_with_root(complex(x), r))
    return S.value, lam + complex(hbar) * S.value, S.tail_bound


# ---------------------------------------------------------------------------
# exact WKB solutions
# ---------------------------------------------------------------------------

@dataclass
class _Segment:
    """``S_alpha`` on a straight segment as a Legendre interpolant in the segment parameter."""

    a: complex
    b: complex
    coef: np.ndarray
    integral: np.ndarray
    tail: float

    def t_of(self, x):
        return 2 * (np.asarray(x, dtype=complex) - self.a) / (self.b - self.a) - 1

    def S_integral(self, x):
        t = self.t_of(x)
        if np.any(np.abs(t.imag) > 1e-9) or np.any(t.real < -1 - 1e-9) or np.any(t.real > 1 + 1e-9):
            raise ValueError("point is not on the cached segment")
        return npleg.legval(t.real, self.integral) * (self.b - self.a) / 2


class ExactSolution:
    """Pair of exact WKB solutions normalised to 1 at ``x0``.

    ``psi_alpha(x) = exp(-(1/hbar) int lambda_alpha - int S_alpha)`` with both
    integrals along the straight segment ``x0 -> x``.  ``theta_minus`` allows a
    lateral direction for the minus root when the ray in direction ``theta``
    runs into a turning point.
    """

    def __init__(self, spec: ProblemSpec, x0, *, theta: float = 0.0, theta_minus: float | None = None,
                 roots: FormalRoots | None = None, order: int = 2, nodes: int = 32, **root_kw):
        self.spec = spec
        self.x0 = complex(x0)
        self.roots = roots if roots is not None else wkb_recursion(spec, max(order, 2))
        self.frame = LiouvilleFrame(spec, self.x0, 1, theta)
        tm = theta if theta_minus is None else theta_minus
        self.plus = ExactRoot(spec, self.roots, self.frame, 1, theta, **root_kw)
        self.minus = ExactRoot(spec, self.roots, self.frame, -1, tm, **root_kw)
        self.nodes = nodes
        self._segments: dict = {}

    def root(self, alpha: int) -> ExactRoot:
        return self.plus if alpha > 0 else self.minus

    def segment(self, alpha: int, x_far, hbar) -> _Segment:
        key = (alpha, complex(x_far), complex(hbar))
        seg = self._segments.get(key)
        if seg is not None:
            return seg
        er = self.root(alpha)
        g, _ = npleg.leggauss(self.nodes)
        a, b = self.x0, complex(x_far)
        xs = a + 0.5 * (g + 1) * (b - a)
        vals, tails = [], []
        for x in xs:
            lv = er.S(x, hbar, self.frame.root_at(x))
            vals.append(lv.value)
            tails.append(lv.tail_bound)
        vals = np.array(vals)
        V = npleg.legvander(g, self.nodes - 1)
        coef = np.linalg.solve(V, vals)
        integ = npleg.legint(coef, lbnd=-1)
        seg = _Segment(a, b, coef, integ, float(max(tails)))
        self._segments[key] = seg
        return seg

    def lambda_integral(self, alpha: int, x) -> complex:
        return complex(self.frame.integrate_fields([self.root(alpha).lam], x)[0])

    def psi(self, alpha: int, x, hbar, x_far=None) -> complex:
        """``psi_alpha(x, hbar)``; ``x_far`` names a cached segment end when ``x`` lies on it."""
        x, hbar = complex(x), complex(hbar)
        if x == self.x0:
            return 1.0 + 0j
        seg = self.segment(alpha, x if x_far is None else x_far, hbar)
        intS = complex(seg.S_integral(x))
        return complex(np.exp(-self.lambda_integral(alpha, x) / hbar - intS))

    def psi_on(self, alpha: int, xs, hbar) -> np.ndarray:
        """``psi_alpha`` at points on one ray from ``x0`` (sharing one cached segment)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=complex))
        far = xs[np.argmax(np.abs(xs - self.x0))]
        return np.array([self.psi(alpha, x, hbar, far) for x in xs])

    def s(self, alpha: int, x, hbar) -> complex:
        return self.root(alpha).s(x, hbar)


def exact_wkb(solution: ExactSolution, x, hbar):
    """``(psi_plus, psi_minus)`` at ``(x, hbar)``."""
    return solution.psi(1, x, hbar), solution.psi(-1, x, hbar)


def wronskian(solution: ExactSolution, x, hbar, psi_pair=None) -> dict:
    """Wronskian data: ``hbar W/(psi_+ psi_-) = s_+ - s_-`` and ``W`` itself.

    ``psi_pair`` reuses already computed ``(psi_+, psi_-)`` values at ``x``.
    """
    sp, sm = solution.s(1, x, hbar), solution.s(-1, x, hbar)
    pp, pm = exact_wkb(solution, x, hbar) if psi_pair is None else psi_pair
    ratio = sp - sm
    return {"x": complex(x), "hbar": complex(hbar), "normalized": ratio, "W": ratio * pp * pm / complex(hbar),
            "sqrt_d0": complex(solution.frame.root_at(x))}


# ---------------------------------------------------------------------------
# monodromy
# ---------------------------------------------------------------------------

@dataclass
class Monodromy:
    alpha: int
    hbars: list
    values: list  # a_alpha(hbar)
    leading: list  # exp(-(1/hbar) loop integral of lambda_alpha)
    loop_S: list  # loop integral of S_alpha
    loop: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        c = lambda z: [complex(z).real, complex(z).imag]
        return {"alpha": self.alpha, "hbar": [c(h) for h in self.hbars],
                "log_a": [c(np.log(v)) if v != 0 else None for v in self.values],
                "log_leading": [c(np.log(v)) if v != 0 else None for v in self.leading],
                "loop_S": [c(v) for v in self.loop_S], "loop": self.loop}


def monodromy(root: ExactRoot, x_start, period_tau: float, hbars, *, nodes: int = 32) -> Monodromy:
    """``a_alpha(hbar) = exp(-(1/hbar) loop integral of s_alpha)`` around a closed trajectory.

    The loop is the trajectory through ``x_start`` in the frame's direction,
    sampled uniformly in its Liouville parameter (so the periodic trapezoid
    rule converges geometrically); ``dx/dtau = e^{i theta}/sqrt(D0)``.
    The leading factor and the ``S`` loop integral are reported separately,
    and the log of ``a`` is kept to avoid overflow.
    """
    frame = root.frame
    x_start = complex(x_start)
    rot = np.exp(1j * root.frame.theta)
    tau = period_tau * np.arange(nodes) / nodes
    r0 = frame.root_at(x_start)
    xs, rs = frame.flow_line(x_start, rot, tau, root=r0) if nodes > 1 else (np.array([x_start]), np.array([r0]))
    # the trajectory closes on a lattice translate of x_start
    dx = rot / rs * (period_tau / nodes)
    lam = np.asarray(root.lam.evaluate_with_root(xs, rs), dtype=complex) * np.ones(nodes)
    lam_loop = complex(np.sum(lam * dx))
    vals, leads, Ss = [], [], []
    for hb in hbars:
        hb = complex(hb)
        S = np.array([root.S(x, hb, r).value for x, r in zip(xs, rs)])
        S_loop = complex(np.sum(S * dx))
        log_lead = -lam_loop / hb
        Ss.append(S_loop)
        leads.append(np.exp(log_lead))
        vals.append(np.exp(log_lead - S_loop))
    loop = {"x_start": [x_start.real, x_start.imag], "period_tau": period_tau, "nodes": nodes,
            "lambda_loop": [lam_loop.real, lam_loop.imag]}
    return Monodromy(root.alpha, [complex(h) for h in hbars], vals, leads, Ss, loop)


def monodromy_log(root: ExactRoot, x_start, period_tau: float, hbar, *, nodes: int = 32) -> complex:
    """``log a_alpha(hbar)`` without exponentiating."""
    m = monodromy(root, x_start, period_tau, [hbar], nodes=nodes)
    return -complex(m.loop["lambda_loop"][0] + 1j * m.loop["lambda_loop"][1]) / complex(hbar) - m.loop_S[0]


# ---------------------------------------------------------------------------
# asymptotic coefficients of a function of hbar
# ---------------------------------------------------------------------------

def asymptotic_coefficients(f, hbars, n: int, *, leading_power: int = 1) -> np.ndarray:
    """First ``n`` coefficients ``c_k`` of ``f(hbar) ~ sum_k c_k hbar^(k + leading_power - 1)``.

    Least-squares polynomial extrapolation of ``f(hbar)/hbar^(leading_power)``
    to ``hbar = 0`` (a Richardson table in disguise: with as many samples as
    unknowns it is exactly Neville's extrapolation).
    """
    hbars = np.asarray(hbars, dtype=float)
    vals = np.array([f(h) for h in hbars]) / hbars**leading_power
    deg = min(len(hbars) - 1, n + 4)
    coef = np.polynomial.polynomial.polyfit(hbars, vals, deg)
    return coef[:n]
