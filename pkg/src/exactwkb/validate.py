"""Independent oracles: direct ODE integration, transfer matrices, residuals, remainder scans."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .formal import FormalWKB, ProblemSpec, formal_wkb

__all__ = [
    "OdeOracleResult",
    "TransferMatrix",
    "StiffnessError",
    "direct_solve",
    "compare_exact",
    "transfer_matrix",
    "monodromy_eigen",
    "riccati_residual_check",
    "ode_residual_check",
    "remainder_scan",
    "RemainderScan",
]


class StiffnessError(RuntimeError):
    pass


@dataclass
class OdeOracleResult:
    x: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray  # hbar psi'
    hbar: complex
    nfev: int
    steps: int
    min_step: float
    error_estimate: float | None = None

    def rows(self):
        for x, p, d in zip(self.x, self.psi, self.dpsi):
            yield x.real, x.imag, p.real, p.imag, d.real, d.imag


def _rhs(spec: ProblemSpec, hbar: complex, a: complex, u: complex):
    def f(s, y):
        x = a + s * u
        psi, phi = y[0], y[1]
        p = complex(spec.p_value(x, hbar))
        q = complex(spec.q_value(x, hbar))
        return np.array([phi / hbar, -(p * phi + q * psi) / hbar]) * u
    return f


def _solve_polyline(spec, path, hbar, y0, x_out, rtol, atol):
    y = np.asarray(y0, dtype=complex)
    found: dict = {}
    nfev = steps = 0
    min_step = np.inf
    for a, b in zip(path[:-1], path[1:]):
        length = abs(b - a)
        if length == 0:
            continue
        u = (b - a) / length
        nodes = {}
        for x in x_out:
            t = (x - a) / (b - a)
            if x not in found and abs(t.imag) < 1e-12 and -1e-12 <= t.real <= 1 + 1e-12:
                nodes[x] = min(max(t.real, 0.0), 1.0) * length
        t_eval = np.unique(np.concatenate([[0.0, length], list(nodes.values())]))
        sol = solve_ivp(_rhs(spec, hbar, a, u), (0.0, length), y, method="DOP853", rtol=rtol, atol=atol,
                        t_eval=t_eval)
        if sol.status != 0:
            raise StiffnessError(f"integration failed on segment {a}->{b}: {sol.message}")
        for x, s in nodes.items():
            found[x] = sol.y[:, int(np.searchsorted(t_eval, s))]
        y = sol.y[:, -1]
        nfev += sol.nfev
        steps += max(1, sol.nfev // 12)
        min_step = min(min_step, length / max(1, sol.nfev // 12))
    missing = [x for x in x_out if x not in found]
    if missing:
        raise ValueError(f"output points not on the path: {missing[:3]}")
    return list(x_out), [found[x] for x in x_out], nfev, steps, min_step, y


def direct_solve(spec: ProblemSpec, path, hbar, initial, *, x_out=None, rtol: float = 1e-10, atol: float = 1e-14,
                 error_estimate: bool = False) -> OdeOracleResult:
    """Integrate ``d/dx (psi, phi) = (phi/hbar, -(p phi + q psi)/hbar)`` along a polyline.

    ``initial`` is ``(psi, hbar psi')`` at ``path[0]``; outputs are reported at
    ``x_out`` (default: the path vertices).  With ``error_estimate`` the solve
    is repeated at ``rtol/10`` and the largest relative change is recorded.
    """
    hbar = complex(hbar)
    if hbar == 0:
        raise ValueError("hbar must be nonzero")
    path = [complex(p) for p in path]
    if len(path) < 2:
        path = path * 2
    x_out = path if x_out is None else [complex(x) for x in np.atleast_1d(x_out)]
    xs, ys, nfev, steps, min_step, _ = _solve_polyline(spec, path, hbar, initial, x_out, rtol, atol)
    ys = np.array(ys).reshape(-1, 2)
    res = OdeOracleResult(np.array(xs), ys[:, 0], ys[:, 1], hbar, nfev, steps, min_step)
    if error_estimate:
        _, ys2, *_ = _solve_polyline(spec, path, hbar, initial, x_out, rtol / 10, atol / 10)
        ys2 = np.array(ys2).reshape(-1, 2)
        scale = np.maximum(np.abs(ys2[:, 0]), 1e-300)
        res.error_estimate = float(np.max(np.abs(ys2[:, 0] - ys[:, 0]) / scale))
    return res


# ---------------------------------------------------------------------------
# comparison with the exact WKB pipeline
# ---------------------------------------------------------------------------

def compare_exact(solution, x_samples, hbars, alphas=(1, -1), *, rtol: float = 1e-10) -> dict:
    """Largest relative deviation of ``psi_alpha`` from the ODE oracle, per ``(alpha, hbar)``.

    The oracle is seeded with ``(1, -s_alpha)`` and integrated in the
    direction in which ``psi_alpha`` grows: forward from ``x0`` when it is
    dominant, otherwise backward from the far end and renormalised at ``x0``.
    """
    spec = solution.spec
    x0 = solution.x0
    xs = np.atleast_1d(np.asarray(x_samples, dtype=complex))
    far = xs[np.argmax(np.abs(xs - x0))]
    report = {"x0": [x0.real, x0.imag], "entries": []}
    for alpha in alphas:
        for hb in hbars:
            hb = complex(hb)
            psi = solution.psi_on(alpha, xs, hb)
            growth = (-solution.lambda_integral(alpha, far) / hb).real
            if growth >= 0:
                s0 = solution.s(alpha, x0, hb)
                oracle = direct_solve(spec, [x0, far], hb, (1.0, -s0), x_out=xs, rtol=rtol)
                ref = _reorder(oracle, xs)
                direction = "forward"
            else:
                s_end = solution.s(alpha, far, hb)
                pts = np.concatenate([xs, [x0]])
                oracle = direct_solve(spec, [far, x0], hb, (1.0, -s_end), x_out=pts, rtol=rtol)
                vals = _reorder(oracle, pts)
                ref = vals[:-1] / vals[-1]
                direction = "backward"
            dev = np.abs(psi / ref - 1)
            report["entries"].append({"alpha": alpha, "hbar": [hb.real, hb.imag], "direction": direction,
                                      "max_rel_dev": float(np.max(dev)), "n_points": len(xs)})
    report["max_rel_dev"] = max(e["max_rel_dev"] for e in report["entries"]) if report["entries"] else 0.0
    return report


def _reorder(res: OdeOracleResult, xs) -> np.ndarray:
    lookup = {complex(x): p for x, p in zip(res.x, res.psi)}
    return np.array([lookup[complex(x)] for x in xs])


# ---------------------------------------------------------------------------
# transfer matrices
# ---------------------------------------------------------------------------

@dataclass
class TransferMatrix:
    M: np.ndarray
    path: list
    hbar: complex
    log_det: complex
    abel_log_det: complex
    det_check: float  # |det M / exp(-(1/hbar) int p) - 1|
    det_feasible: bool

    def eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.M)
        return ev[np.argsort(-np.abs(ev))]

    def to_json(self) -> dict:
        c = lambda z: [complex(z).real, complex(z).imag]
        return {"M": [[c(v) for v in row] for row in self.M], "hbar": c(self.hbar),
                "eigenvalues": [c(v) for v in self.eigenvalues()], "det_check": self.det_check,
                "det_feasible": self.det_feasible}


def transfer_matrix(spec: ProblemSpec, path, hbar, *, rtol: float = 1e-10, atol: float = 1e-14) -> TransferMatrix:
    """Matrix sending ``(psi, hbar psi')`` at the start of ``path`` to its end.

    The Abel identity ``det M = exp(-(1/hbar) int p)`` is checked; when the
    entries are so large that forming the determinant cancels catastrophically
    (``|M|^2 eps >~ |det|``) the check is marked infeasible.
    """
    hbar = complex(hbar)
    path = [complex(p) for p in path]
    if all(p == path[0] for p in path):
        M = np.eye(2, dtype=complex)
    else:
        cols = []
        for y0 in ((1.0, 0.0), (0.0, 1.0)):
            *_, y_end = _solve_polyline(spec, path, hbar, y0, [], rtol, atol)
            cols.append(y_end)
        M = np.array(cols).T
    abel = 0j
    g, w = np.polynomial.legendre.leggauss(40)
    for a, b in zip(path[:-1], path[1:]):
        t = a + 0.5 * (g + 1) * (b - a)
        abel += np.sum(0.5 * w * np.asarray(spec.p_value(t, hbar), dtype=complex) * np.ones_like(t)) * (b - a)
    abel_log = -abel / hbar
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    size = float(np.max(np.abs(M))) ** 2
    feasible = size * rtol < 1e-2 * abs(np.exp(abel_log)) if np.isfinite(size) else False
    check = abs(det / np.exp(abel_log) - 1) if det != 0 else float("inf")
    return TransferMatrix(M, path, hbar, complex(np.log(det)) if det != 0 else complex(-np.inf), complex(abel_log),
                          float(check), bool(feasible))


def monodromy_eigen(spec: ProblemSpec, x_start, period, hbar, **kw) -> dict:
    """Floquet multipliers over one period, each taken from the direction where it dominates.

    The large multiplier is the dominant eigenvalue of the forward matrix;
    the small one is the reciprocal of the dominant eigenvalue of the
    backward matrix, which keeps its relative accuracy.
    """
    x_start, period = complex(x_start), complex(period)
    fwd = transfer_matrix(spec, [x_start, x_start + period], hbar, **kw)
    bwd = transfer_matrix(spec, [x_start + period, x_start], hbar, **kw)
    big = fwd.eigenvalues()[0]
    small = 1.0 / bwd.eigenvalues()[0]
    return {"large": complex(big), "small": complex(small), "forward": fwd, "backward": bwd}


# ---------------------------------------------------------------------------
# residual suites
# ---------------------------------------------------------------------------

def riccati_residual_check(spec: ProblemSpec, root, xs, hbars, *, dx: float = 1e-5) -> dict:
    """``|hbar s' - (s^2 - p s + q)| / (1 + |s|^2)`` with a central difference for ``s'``."""
    worst = 0.0
    rows = []
    for hb in hbars:
        hb = complex(hb)
        for x in xs:
            x = complex(x)
            sp, sm, s0 = root.s(x + dx, hb), root.s(x - dx, hb), root.s(x, hb)
            ds = (sp - sm) / (2 * dx)
            p, q = complex(spec.p_value(x, hb)), complex(spec.q_value(x, hb))
            r = abs(hb * ds - (s0 * s0 - p * s0 + q)) / (1 + abs(s0) ** 2)
            rows.append((x, hb, r))
            worst = max(worst, r)
    return {"max_residual": worst, "samples": rows}


def ode_residual_check(spec: ProblemSpec, psi, xs, hbar, *, dx: float = 1e-3) -> float:
    """``|hbar^2 psi'' + p hbar psi' + q psi| / |psi|`` by 5-point differences, worst over ``xs``."""
    hb = complex(hbar)
    worst = 0.0
    for x in xs:
        x = complex(x)
        v = np.array([psi(x + k * dx) for k in (-2, -1, 0, 1, 2)])
        d1 = (v[0] - 8 * v[1] + 8 * v[3] - v[4]) / (12 * dx)
        d2 = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * dx * dx)
        p, q = complex(spec.p_value(x, hb)), complex(spec.q_value(x, hb))
        r = abs(hb * hb * d2 + p * hb * d1 + q * v[2]) / abs(v[2])
        worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# asymptotic remainder scaling
# ---------------------------------------------------------------------------

@dataclass
class RemainderScan:
    x: complex
    hbars: np.ndarray
    remainders: np.ndarray  # shape (n_max + 1, len(hbars))
    slopes: dict
    constants: dict
    excluded: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"x": [self.x.real, self.x.imag], "hbar": self.hbars.tolist(),
                "slopes": {str(k): v for k, v in self.slopes.items()},
                "constants": {str(k): v for k, v in self.constants.items()},
                "excluded": {str(k): v for k, v in self.excluded.items()}}


def remainder_scan(solution, alpha: int, x, hbars, n_max: int = 3, *, wkb: FormalWKB | None = None,
                   noise: float = 1e2 * np.finfo(float).eps) -> RemainderScan:
    """Log-log slopes of ``e^{Phi/hbar} psi - sum_{k<n} Psi^(k) hbar^k`` against ``hbar``.

    Samples whose remainder sits below the noise floor are excluded from the
    fit; if fewer than two remain the slope is reported as ``nan``.
    """
    x = complex(x)
    hbars = np.asarray(hbars, dtype=float)
    if wkb is None:
        wkb = formal_wkb(solution.roots, solution.frame, [x], alpha)
    if n_max >= wkb.order:
        raise ValueError(f"n_max={n_max} needs formal order > {n_max}, have {wkb.order}")
    phi = wkb.exponent[0]
    rem = np.zeros((n_max + 1, len(hbars)))
    for i, hb in enumerate(hbars):
        val = np.exp(phi / hb) * solution.psi(alpha, x, hb)
        for n in range(n_max + 1):
            rem[n, i] = abs(val - sum(wkb.psi[k][0] * hb**k for k in range(n)))
    slopes, consts, excluded = {}, {}, {}
    for n in range(n_max + 1):
        ok = rem[n] > noise * max(1.0, abs(wkb.psi[0][0]))
        excluded[n] = int((~ok).sum())
        if ok.sum() < 2:
            slopes[n], consts[n] = float("nan"), float("nan")
            continue
        b, a = np.polyfit(np.log(hbars[ok]), np.log(rem[n][ok]), 1)
        slopes[n], consts[n] = float(b), float(math.exp(a))
    return RemainderScan(x, hbars, rem, slopes, consts, excluded)
