"""Borel-plane solution of the Riccati equation on characteristic triangles.

Grid layout: for a base point ``x`` and a direction ``e^{i theta}`` the flow
points ``x_j = Phi^{-1}(Phi(x) + alpha e^{i theta} j h)`` and Borel nodes
``xi_k = e^{i theta} k h`` form a triangle ``j + k <= n``.  The flow target
of ``(x_j, t = e^{i theta} m h)`` is ``x_{j+m}``, so the integral operator
only ever touches grid values (sums along anti-diagonals).

The unknown is ``tau`` with ``S = s^(1) + eps sqrt(D0) T`` and ``tau = B[T]``.
It solves

    tau = -b0(x_xi) + I[beta0 + k1 tau + kappa1 * tau + tau * tau]

where ``I[F](x, xi) = -int_0^xi F(x_t, xi - t) dt`` and ``*`` is the
Borel-plane convolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import fftconvolve

from .coeffield import FieldElement
from .formal import FormalRoots, ProblemSpec

__all__ = [
    "StandardFormCoeffs",
    "BorelField",
    "BorelDivergenceError",
    "standard_form",
    "apply_I",
    "convolve",
    "flow_grid",
    "tau_recursion",
    "tau_march",
    "solve_borel",
    "successive_approx_check",
    "exponential_type",
    "bound_fit",
]


class BorelDivergenceError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


@dataclass
class StandardFormCoeffs:
    """Coefficients of the Riccati equation after removing ``lambda`` and ``s^(1)``.

    ``b0, b1, B0, B1`` follow the textbook definitions.  The solver uses the
    kernel coefficients ``k1`` and ``kappa1``, which differ from ``b1`` and
    ``beta1`` in the sign of the ``2 s^(1) - p1 - h p_*`` part (obtained by
    expanding the Riccati equation directly).
    """

    alpha: int
    s1: FieldElement
    b0: FieldElement
    b1: FieldElement
    B0: list  # h^m coefficients, m >= 0 (B0[0] == 0)
    B1: list
    beta0: list  # xi^k coefficients
    beta1: list
    k1: FieldElement
    K1: list
    kappa1: list

    @property
    def has_beta0(self) -> bool:
        return any(not c.is_zero() for c in self.beta0)

    @property
    def has_kappa1(self) -> bool:
        return any(not c.is_zero() for c in self.kappa1)


def _borel_poly(hcoeffs: list) -> list:
    """``h^m -> xi^(m-1)/(m-1)!`` on a finite h-polynomial without constant term."""
    return [hcoeffs[m] * Fraction(1, math.factorial(m - 1)) for m in range(1, len(hcoeffs))]


def standard_form(spec: ProblemSpec, roots: FormalRoots, alpha: int) -> StandardFormCoeffs:
    if roots.order < 1:
        raise ValueError("standard form needs s^(1)")
    d0 = roots.d0
    s = roots.coeffs(alpha)
    lam, s1 = s[0], s[1]
    zero = FieldElement.lift(0, d0)
    eps_sq = FieldElement(d0.constant(0), d0.constant(alpha), d0)
    dlog = FieldElement.lift(d0.derivative() / (d0 * 2), d0)
    p1, p2, q2 = spec.p_k(1), spec.p_k(2), spec.q_k(2)
    b0 = (s1 * s1 - s1.derivative() - s1 * p1 + q2 - lam * p2) / d0
    b1 = (-s1 * 2 - dlog + p1) / eps_sq
    k1 = (s1 * 2 - dlog - p1) / eps_sq
    top = max(len(spec.p), len(spec.q))
    B0, B1 = [zero], [zero]
    for m in range(1, max(top - 1, 1)):
        B0.append((lam * (-spec.p_k(m + 2)) - s1 * spec.p_k(m + 1) + spec.q_k(m + 2)) / d0)
        B1.append(FieldElement.lift(spec.p_k(m + 1), d0) / eps_sq)
    K1 = [-c for c in B1]
    return StandardFormCoeffs(alpha, s1, b0, b1, B0, B1, _borel_poly(B0), _borel_poly(B1), k1, K1, _borel_poly(K1))


# ---------------------------------------------------------------------------
# grid operators
# ---------------------------------------------------------------------------

def _tri_mask(n: int) -> np.ndarray:
    j, k = np.indices((n + 1, n + 1))
    return j + k <= n


def apply_I(F: np.ndarray, h: float, theta: float = 0.0) -> np.ndarray:
    """Trapezoid ``-int_0^xi F(x_t, xi - t) dt`` on a triangle array ``F[j, k]``."""
    F = np.asarray(F, dtype=complex)
    n = F.shape[0] - 1
    j, k = np.indices(F.shape)
    valid = j + k <= n
    d = j + k
    G = np.zeros_like(F)
    G[d[valid], k[valid]] = F[valid]  # G[d, k] = F[d - k, k]
    C = np.cumsum(G, axis=1)
    out = np.zeros_like(F)
    dv, kv = d[valid], k[valid]
    out[valid] = C[dv, kv] - 0.5 * G[dv, 0] - 0.5 * G[dv, kv]
    return -np.exp(1j * theta) * h * out


def convolve(f: np.ndarray, g: np.ndarray, h: float, theta: float = 0.0) -> np.ndarray:
    """Trapezoid Borel convolution along the last axis (row-wise for 2-D input)."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if f.shape != g.shape:
        raise ValueError(f"grid mismatch: {f.shape} vs {g.shape}")
    one_d = f.ndim == 1
    if one_d:
        f, g = f[None, :], g[None, :]
    m = f.shape[1]
    full = fftconvolve(f, g, axes=1)[:, :m] if m > 64 else np.array(
        [np.convolve(a, b)[:m] for a, b in zip(f, g)])
    out = full - 0.5 * f * g[:, :1] - 0.5 * f[:, :1] * g
    out = np.exp(1j * theta) * h * out
    return out[0] if one_d else out


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

@dataclass
class FlowGrid:
    x: complex
    alpha: int
    theta: float
    h: float
    xs: np.ndarray
    roots: np.ndarray

    @property
    def n(self) -> int:
        return len(self.xs) - 1

    @property
    def xi(self) -> np.ndarray:
        return np.exp(1j * self.theta) * self.h * np.arange(self.n + 1)

    def coarsen(self) -> "FlowGrid":
        return FlowGrid(self.x, self.alpha, self.theta, 2 * self.h, self.xs[::2], self.roots[::2])


def flow_grid(frame, x, alpha: int, theta: float, xi_max: float, n: int, root=None) -> FlowGrid:
    h = float(xi_max) / n
    xs, roots = frame.flow_line(x, alpha * np.exp(1j * theta), h * np.arange(n + 1), root=root)
    return FlowGrid(complex(x), alpha, theta, h, xs, roots)


@dataclass
class BorelField:
    theta: float
    alpha: int
    grid: FlowGrid
    tau: np.ndarray  # triangle tau[j, k] ~ tau(x_j, xi_k)
    method: str
    report: dict = field(default_factory=dict)
    terms: list | None = None

    @property
    def x(self) -> complex:
        return self.grid.x

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def tau_base(self) -> np.ndarray:
        return self.tau[0]

    @property
    def sigma_base(self) -> np.ndarray:
        """``sigma = eps sqrt(D0) tau`` at the base point."""
        return self.alpha * self.grid.roots[0] * self.tau[0]

    def sigma(self) -> np.ndarray:
        return self.alpha * self.grid.roots[:, None] * self.tau * _tri_mask(self.grid.n)

    def rows(self):
        direction = np.exp(1j * self.theta)
        for j, xj in enumerate(self.grid.xs):
            for k in range(self.grid.n + 1 - j):
                t = self.tau[j, k]
                yield (j, xj.real, xj.imag, direction.real, direction.imag, k * self.h, t.real, t.imag)


def _grid_data(coeffs: StandardFormCoeffs, grid: FlowGrid):
    n = grid.n
    xs, roots = grid.xs, grid.roots
    b0v = np.asarray(coeffs.b0.evaluate_with_root(xs, roots), dtype=complex) * np.ones(n + 1)
    k1v = np.asarray(coeffs.k1.evaluate_with_root(xs, roots), dtype=complex) * np.ones(n + 1)
    mask = _tri_mask(n)
    seed = np.zeros((n + 1, n + 1), dtype=complex)
    j, k = np.indices(seed.shape)
    seed[mask] = -b0v[(j + k)[mask]]
    xi = grid.xi

    def poly_grid(cs):
        out = np.zeros((n + 1, n + 1), dtype=complex)
        for m, c in enumerate(cs):
            if c.is_zero():
                continue
            v = np.asarray(c.evaluate_with_root(xs, roots), dtype=complex) * np.ones(n + 1)
            out += v[:, None] * xi[None, :] ** m
        return out * mask

    return seed, k1v, poly_grid(coeffs.beta0), poly_grid(coeffs.kappa1), mask


def tau_recursion(coeffs: StandardFormCoeffs, grid: FlowGrid, *, max_terms: int = 40,
                  tol_term: float = 1e-12, raise_on_divergence: bool = True) -> BorelField:
    """Term-by-term series ``tau = sum tau_n``.

    ``tau_0`` is the transported seed, ``tau_1 = I[beta0 + k1 tau_0]`` and
    ``tau_n = I[k1 tau_{n-1} + kappa1 * tau_{n-2} + sum tau_a * tau_b]`` with
    ``a + b = n - 2``.
    """
    theta, h = grid.theta, grid.h
    seed, k1v, beta0, kappa, mask = _grid_data(coeffs, grid)
    k1 = k1v[:, None]
    conv = lambda a, b: convolve(a, b, h, theta) * mask
    I = lambda F: apply_I(F * mask, h, theta) * mask
    terms = [seed]
    norms = [float(np.max(np.abs(seed)))]
    terms.append(I(beta0 + k1 * seed))
    norms.append(float(np.max(np.abs(terms[1]))))
    ref = max(norms[0], norms[1])
    ratios: list[float] = []
    status = "converged" if ref == 0 else "max_terms"
    bumps = 0
    n = 2
    while ref > 0 and n < max_terms:
        F = k1 * terms[n - 1]
        if coeffs.has_kappa1:
            F = F + conv(kappa, terms[n - 2])
        pair = np.zeros_like(seed)
        for a in range((n - 2) // 2 + 1):
            b = n - 2 - a
            c = conv(terms[a], terms[b])
            pair += c if a == b else 2 * c
        terms.append(I(F + pair))
        norms.append(float(np.max(np.abs(terms[-1]))))
        # odd/even terms may vanish identically, so compare pairwise maxima
        cur, prev = max(norms[-1], norms[-2]), max(norms[-2], norms[-3])
        ratio = cur / prev if prev > 0 else 0.0
        ratios.append(ratio)
        bumps = bumps + 1 if ratio > 1 else 0
        n += 1
        if bumps >= 3:
            status = "diverged"
            break
        if cur < tol_term * ref and ratio < 1:
            status = "converged"
            break
    tau = np.sum(terms, axis=0)
    report = {"method": "series", "terms_used": len(terms), "term_norms": norms, "ratios": ratios,
              "status": status, "converged": status == "converged", "h": h, "n": grid.n}
    if status != "converged" and raise_on_divergence:
        raise BorelDivergenceError(f"Borel series {status} after {len(terms)} terms "
                                   f"(last norm {norms[-1]:.3g}); reduce xi_max", report)
    bf = BorelField(theta, grid.alpha, grid, tau, "series", report, terms)
    report["residual"] = integral_equation_residual(coeffs, bf)
    return bf


def tau_march(coeffs: StandardFormCoeffs, grid: FlowGrid) -> BorelField:
    """Solve the discrete integral equation directly, one Borel node at a time.

    Values on anti-diagonal ``d = j + k`` are accumulated so each new node
    costs one convolution dot product; the equation is linear in the new
    value and is solved for it exactly.
    """
    n, h, theta = grid.n, grid.h, grid.theta
    seed, k1v, beta0, kappa, mask = _grid_data(coeffs, grid)
    ch = np.exp(1j * theta) * h
    tau = np.zeros((n + 1, n + 1), dtype=complex)
    F = np.zeros_like(tau)
    tau[:, 0] = seed[:, 0]
    F[:, 0] = beta0[:, 0] + k1v * tau[:, 0]
    acc = 0.5 * F[:, 0].copy()
    use_kappa = coeffs.has_kappa1
    for k in range(1, n + 1):
        js = np.arange(n - k + 1)
        d = js + k
        t0 = tau[js, 0]
        A = beta0[js, k].copy()
        if k > 1:
            A += ch * np.einsum("ij,ij->i", tau[js, 1:k], tau[js, k - 1:0:-1])
        Lc = k1v[js] + ch * t0
        if use_kappa:
            A += ch * 0.5 * kappa[js, k] * t0
            if k > 1:
                A += ch * np.einsum("ij,ij->i", kappa[js, k - 1:0:-1], tau[js, 1:k])
            Lc = Lc + 0.5 * ch * kappa[js, 0]
        val = (seed[js, k] - ch * (acc[d] + 0.5 * A)) / (1 + 0.5 * ch * Lc)
        tau[js, k] = val
        F[js, k] = A + Lc * val
        acc[d] += F[js, k]
    bf = BorelField(theta, grid.alpha, grid, tau * mask, "march", {"method": "march", "h": h, "n": n})
    return bf


def integral_equation_residual(coeffs: StandardFormCoeffs, bf: BorelField) -> float:
    """Sup-norm of ``tau - (seed + I[beta0 + k1 tau + kappa1 * tau + tau * tau])`` on the grid."""
    grid = bf.grid
    seed, k1v, beta0, kappa, mask = _grid_data(coeffs, grid)
    conv = lambda a, b: convolve(a, b, grid.h, grid.theta) * mask
    F = beta0 + k1v[:, None] * bf.tau + conv(bf.tau, bf.tau)
    if coeffs.has_kappa1:
        F = F + conv(kappa, bf.tau)
    rhs = seed + apply_I(F * mask, grid.h, grid.theta)
    return float(np.max(np.abs((bf.tau - rhs) * mask)))


def solve_borel(coeffs: StandardFormCoeffs, frame, x, alpha: int, theta: float, xi_max: float, n: int, *,
                root=None, method: str = "march", richardson: bool = True, **kw) -> BorelField:
    """Borel field at base point ``x``; with ``richardson`` the ``h`` and ``h/2``
    solutions are combined as ``(4 tau_{h/2} - tau_h)/3`` on the coarse nodes."""
    if n % 2:
        n += 1
    solver = tau_march if method == "march" else (lambda c, g: tau_recursion(c, g, **kw))
    if not richardson:
        return solver(coeffs, flow_grid(frame, x, alpha, theta, xi_max, n, root))
    fine_grid = flow_grid(frame, x, alpha, theta, xi_max, 2 * n, root)
    coarse_grid = fine_grid.coarsen()
    fine = solver(coeffs, fine_grid)
    coarse = solver(coeffs, coarse_grid)
    tf = fine.tau[::2, ::2]
    mask = _tri_mask(n)
    tau = (4 * tf - coarse.tau) / 3 * mask
    err = float(np.max(np.abs(tf - coarse.tau))) / 3
    report = {"method": f"{fine.method}+richardson", "h": coarse_grid.h, "n": n, "richardson_delta": err}
    if fine.report.get("status"):
        report["status"] = fine.report["status"]
        report["term_norms"] = fine.report.get("term_norms")
    return BorelField(theta, alpha, coarse_grid, tau, report["method"], report)


# ---------------------------------------------------------------------------
# standard (z, xi) coordinates
# ---------------------------------------------------------------------------

def successive_approx_check(coeffs: StandardFormCoeffs, frame, x, alpha: int, theta: float, xi_max: float,
                            n: int, *, root=None, max_terms: int = 60, tol_term: float = 1e-14):
    """Successive approximations in ``z = eps e^{-i theta} Phi`` coordinates.

    Base points are found by Newton on the quadrature Liouville map (not by
    the flow ODE).  In these coordinates ``phi = e^{i theta} tau(x, e^{i theta} xi')``
    solves ``phi = -a0(z + xi') + I+[alpha0 + a1 phi + alpha1 * phi + c phi * phi]``
    with ``a_k = e^{i theta} b_k``-type coefficients and ``c = e^{i theta}``.
    Returns ``(tau_on_grid, phi_terms, xs)``.
    """
    h = float(xi_max) / n
    rot = np.exp(1j * theta)
    x = complex(x)
    r = frame.root_at(x) if root is None else complex(root)
    xs, rs = [x], [r]
    phi_x = frame.liouville_eval(x)
    for j in range(1, n + 1):
        target = phi_x + alpha * rot * j * h
        guess = xs[-1] + alpha * rot * h / rs[-1]
        xn, rn = _newton_phi(frame, target, xs[-1], rs[-1], phi_x + alpha * rot * (j - 1) * h, guess)
        xs.append(xn), rs.append(rn)
    xs, rs = np.array(xs), np.array(rs)
    mask = _tri_mask(n)
    a0 = rot * np.asarray(coeffs.b0.evaluate_with_root(xs, rs), dtype=complex) * np.ones(n + 1)
    a1 = rot * np.asarray(coeffs.k1.evaluate_with_root(xs, rs), dtype=complex) * np.ones(n + 1)
    xi = h * np.arange(n + 1)

    def zpoly(cs):
        # h^m coefficient picks up e^{i (m+1) theta}; after Borel, xi'^(m-1)/(m-1)!
        out = np.zeros((n + 1, n + 1), dtype=complex)
        for i, c in enumerate(cs):
            if c.is_zero():
                continue
            v = np.asarray(c.evaluate_with_root(xs, rs), dtype=complex) * np.ones(n + 1)
            out += rot ** (i + 2) * v[:, None] * xi[None, :] ** i
        return out * mask

    al0, al1 = zpoly(coeffs.beta0), zpoly(coeffs.kappa1)
    j, k = np.indices((n + 1, n + 1))
    phi0 = np.zeros((n + 1, n + 1), dtype=complex)
    phi0[mask] = -a0[(j + k)[mask]]
    I = lambda F: apply_I(F * mask, h, 0.0) * mask
    conv = lambda a, b: convolve(a, b, h, 0.0) * mask
    terms = [phi0, I(al0 + a1[:, None] * phi0)]
    ref = max(np.max(np.abs(terms[0])), np.max(np.abs(terms[1])))
    for m in range(2, max_terms):
        F = a1[:, None] * terms[m - 1]
        if coeffs.has_kappa1:
            F = F + conv(al1, terms[m - 2])
        pair = np.zeros_like(phi0)
        for a in range((m - 2) // 2 + 1):
            b = m - 2 - a
            c = conv(terms[a], terms[b])
            pair += c if a == b else 2 * c
        terms.append(I(F + rot * pair))
        cur = max(np.max(np.abs(terms[-1])), np.max(np.abs(terms[-2])))
        if ref == 0 or cur < tol_term * ref:
            break
    phi = np.sum(terms, axis=0)
    tau = phi / rot
    return tau, terms, xs


def _newton_phi(frame, target, x_prev, r_prev, phi_prev, guess, tol=1e-14, maxiter=50):
    x, r = complex(guess), None
    from .geometry import _nearest_root

    r = _nearest_root(frame.d0_value(x), r_prev)
    for _ in range(maxiter):
        phi = phi_prev + frame.phi_between(x_prev, x, r_prev)
        step = (target - phi) / r
        x = x + step
        r = _nearest_root(frame.d0_value(x), r)
        if abs(step) < tol * (1 + abs(x)):
            break
    return x, r


# ---------------------------------------------------------------------------
# growth diagnostics
# ---------------------------------------------------------------------------

def exponential_type(xi_abs: np.ndarray, values: np.ndarray, floor: float = 1e-300):
    """Fit ``|values| <= A exp(L |xi|)``: slope from the upper half, A as envelope."""
    xi_abs = np.asarray(xi_abs, dtype=float)
    mag = np.abs(np.asarray(values))
    if not np.any(mag > floor):
        return 0.0, 0.0
    sel = (xi_abs >= 0.5 * xi_abs[-1]) & (mag > floor)
    if sel.sum() >= 2:
        L = float(np.polyfit(xi_abs[sel], np.log(mag[sel]), 1)[0])
    else:
        L = 0.0
    A = float(np.max(mag * np.exp(-L * xi_abs)))
    return A, L


def bound_fit(terms: list, h: float, L: float = 0.0):
    """Constants with ``sup|phi_n| <= A B^n |xi|^n/n! e^{L|xi|}`` over the grid.

    ``M_n`` is the smallest constant for term ``n``; ``A = M_0`` and ``B`` is
    the envelope ``max (M_n/A)^(1/n)``.
    """
    n = terms[0].shape[-1] - 1
    xi = h * np.arange(n + 1)
    M = []
    for m, t in enumerate(terms):
        denom = xi[None, :] ** m / math.factorial(m) * np.exp(L * xi[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0, np.abs(t) / denom, 0.0)
        if m > 0:
            ratio[:, 0] = 0.0
        M.append(float(np.max(ratio)))
    A = max(M[0], 1e-300)
    B = max([(Mn / A) ** (1.0 / m) for m, Mn in enumerate(M) if m > 0 and Mn > 0] or [0.0])
    return A, B, M
