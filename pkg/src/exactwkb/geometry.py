"""Liouville coordinate, square-root continuation, WKB trajectories and flow lines.

Every numeric value of sqrt(D0) handed out here is continued from the seed
at the frame's basepoint, so sign conventions stay consistent between the
formal, Borel and Laplace stages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import DOP853, solve_ivp
from scipy.optimize import minimize_scalar

from .coeffield import RationalFunction

__all__ = [
    "GeometryError",
    "PathTooCloseError",
    "FlowError",
    "CriticalPoint",
    "LiouvilleFrame",
    "TrajectoryHalf",
    "Trajectory",
    "STATUSES",
    "classify_critical_points",
    "trace_trajectory",
    "trace_both",
    "flow_map",
]

STATUSES = (
    "complete_generic",
    "complete_closed",
    "hit_turning_point",
    "hit_simple_pole",
    "escaped_domain",
    "budget_exhausted",
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class GeometryError(RuntimeError):
    pass


class PathTooCloseError(GeometryError):
    """A quadrature path comes within the clearance of a critical point."""


class FlowError(GeometryError):
    """A flow line ran into a critical point or left the admissible region."""


@dataclass(frozen=True)
class CriticalPoint:
    """A zero or pole of D0; ``location is None`` stands for the point at infinity.

    ``order`` is the multiplicity for turning points and the pole order of the
    quadratic differential D0 dx^2 otherwise.  At infinity the order is read off
    from ``D0(1/w)/w^4`` so polynomial D0 of degree d gives ``d + 4``.
    """

    location: complex | None
    kind: str  # turning_point | simple_pole | infinite_critical | regular
    order: int

    @property
    def at_infinity(self) -> bool:
        return self.location is None

    def to_json(self) -> dict:
        loc = None if self.location is None else [float(np.real(self.location)), float(np.imag(self.location))]
        return {"location": loc, "kind": self.kind, "order": self.order}


def _cluster_roots(pairs, ndigits=8):
    return [(complex(round(r.real, ndigits), round(r.imag, ndigits)), m) for r, m in pairs]


def classify_critical_points(spec) -> list[CriticalPoint]:
    """Finite critical points of D0 with orders, followed by the point at infinity.

    Coefficients outside the rational backend have no algebraic root finder;
    their finite critical points come from ``spec.critical_points`` and the
    point at infinity is reported as an essential singularity (order -1).
    """
    d0 = spec.d0
    out: list[CriticalPoint] = []
    if not isinstance(d0, RationalFunction):
        for c in spec.critical_points or []:
            if isinstance(c, CriticalPoint):
                out.append(c)
            else:
                loc, kind, order = c
                out.append(CriticalPoint(complex(loc), kind, int(order)))
        out.append(CriticalPoint(None, "essential", -1))
        return out
    zeros, poles = d0.factor_orders()
    for r, m in _cluster_roots(zeros):
        out.append(CriticalPoint(r, "turning_point", m))
    for r, m in _cluster_roots(poles):
        out.append(CriticalPoint(r, "simple_pole" if m == 1 else "infinite_critical", m))
    m_inf = (len(d0.num) - len(d0.den)) + 4
    if m_inf >= 2:
        out.append(CriticalPoint(None, "infinite_critical", m_inf))
    elif m_inf == 1:
        out.append(CriticalPoint(None, "simple_pole", 1))
    elif m_inf == 0:
        out.append(CriticalPoint(None, "regular", 0))
    else:
        out.append(CriticalPoint(None, "turning_point", -m_inf))
    return out


def _nearest_root(d0_val, ref):
    r = np.sqrt(complex(d0_val))
    return r if abs(r - ref) <= abs(r + ref) else -r


class LiouvilleFrame:
    """Basepoint ``x0`` with a chosen sign of sqrt(D0) there.

    ``Phi(x) = int_{x0}^x sqrt(D0)`` along straight segments (or a given
    polyline) with the root continued by continuity.
    """

    def __init__(self, spec, x0, branch: int = 1, theta: float = 0.0, *, clearance: float = 1e-8):
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        self.spec = spec
        self.x0 = complex(x0)
        self.branch = branch
        self.theta = float(theta)
        self.clearance = clearance
        self.d0 = spec.d0
        self.dd0 = self.d0.derivative()
        self.period = None if spec.period is None else complex(spec.period)
        self.critical = classify_critical_points(spec)
        self._finite = np.array([c.location for c in self.critical if c.location is not None and c.kind != "regular"],
                                dtype=complex)
        self._turning = [c for c in self.critical if c.location is not None and c.kind == "turning_point"]
        d = self.d0_value(self.x0)
        if d == 0:
            raise GeometryError(f"basepoint {x0} is a turning point")
        self.root0 = branch * np.sqrt(d)

    # -- pointwise data ------------------------------------------------------
    def d0_value(self, x) -> complex:
        return complex(self.d0(complex(x)))

    def dd0_value(self, x) -> complex:
        return complex(self.dd0(complex(x)))

    def images(self, loc: complex, near: complex) -> list[complex]:
        """Periodic copies of ``loc`` closest to ``near`` (just ``loc`` if aperiodic)."""
        if self.period is None:
            return [loc]
        k = round(((near - loc) / self.period).real)
        return [loc + (k + i) * self.period for i in (-1, 0, 1)]

    def critical_distance(self, x: complex) -> float:
        if not len(self._finite):
            return math.inf
        return min(abs(x - c) for loc in self._finite for c in self.images(loc, x))

    def _segment_clearance(self, a: complex, b: complex) -> float:
        if not len(self._finite):
            return math.inf
        best = math.inf
        seg = b - a
        for loc in self._finite:
            for c in self.images(loc, 0.5 * (a + b)):
                if seg == 0:
                    d = abs(c - a)
                else:
                    t = min(1.0, max(0.0, ((c - a) / seg).real))
                    d = abs(a + t * seg - c)
                best = min(best, d)
        return best

    # -- path quadrature -------------------------------------------------------
    def _segment_nodes(self, a: complex, b: complex, refine: int = 1):
        L = abs(b - a)
        if L == 0:
            return np.zeros(0, complex), np.zeros(0, complex)
        dist = self._segment_clearance(a, b)
        if dist < self.clearance:
            raise PathTooCloseError(f"segment {a}->{b} passes within {dist:.3g} of a critical point")
        panels = 1 if not math.isfinite(dist) else int(min(4000, max(1, math.ceil(2.0 * L / dist))))
        panels *= refine
        edges = np.linspace(0.0, 1.0, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        t = (mid + half * _GL_X[None, :]).ravel()
        w = (half * _GL_W[None, :]).ravel()
        return a + t * (b - a), w * (b - a)

    def _continue_roots(self, xs: np.ndarray, start_root: complex) -> np.ndarray:
        d = np.asarray(self.d0(xs), dtype=complex)
        r = np.sqrt(d)
        out = np.empty_like(r)
        prev = start_root
        for i in range(len(r)):
            v = r[i] if abs(r[i] - prev) <= abs(r[i] + prev) else -r[i]
            out[i] = v
            prev = v
        return out

    def path_quadrature(self, path: Sequence[complex], refine: int = 1, start_root=None):
        """Nodes, complex weights and continued roots along a polyline."""
        pts = [complex(p) for p in path]
        root = self.root0 if start_root is None else complex(start_root)
        xs, ws, rs = [], [], []
        for a, b in zip(pts[:-1], pts[1:]):
            x, w = self._segment_nodes(a, b, refine)
            if not len(x):
                continue
            r = self._continue_roots(x, root)
            root = _nearest_root(self.d0_value(b), r[-1])
            xs.append(x), ws.append(w), rs.append(r)
        if not xs:
            return np.zeros(0, complex), np.zeros(0, complex), np.zeros(0, complex), root
        return np.concatenate(xs), np.concatenate(ws), np.concatenate(rs), root

    def _path(self, x, path):
        if path is None:
            return [self.x0, complex(x)]
        path = [complex(p) for p in path]
        if abs(path[0] - self.x0) > 1e-14 * (1 + abs(self.x0)):
            raise GeometryError("path must start at the basepoint")
        return path

    def root_at(self, x, path=None) -> complex:
        """sqrt(D0(x)) continued from the basepoint along ``path`` (default: straight)."""
        _, _, _, root = self.path_quadrature(self._path(x, path))
        return root

    def liouville_eval(self, x, path=None) -> complex:
        """``Phi(x) = int_path sqrt(D0)``."""
        _, w, r, _ = self.path_quadrature(self._path(x, path))
        return complex(np.sum(w * r))

    def integrate_fields(self, coeffs, x, path=None, *, rtol: float = 1e-10) -> np.ndarray:
        """``int_{x0}^x c`` for each field element ``c``, with panel doubling until ``rtol``."""
        path = self._path(x, path)
        prev = None
        for refine in (1, 2, 4, 8, 16):
            xs, w, r, _ = self.path_quadrature(path, refine)
            if not len(xs):
                return np.zeros(len(coeffs), dtype=complex)
            vals = np.array([np.sum(w * np.asarray(c.evaluate_with_root(xs, r), dtype=complex)) for c in coeffs])
            if prev is not None and np.all(np.abs(vals - prev) <= rtol * np.maximum(1.0, np.abs(vals))):
                return vals
            prev = vals
        return prev

    def phi_between(self, a: complex, b: complex, root_a: complex) -> complex:
        """``int_a^b sqrt(D0)`` on the straight segment, root seeded at ``a``."""
        _, w, r, _ = self.path_quadrature([a, b], start_root=root_a)
        return complex(np.sum(w * r))

    def phi_to_critical(self, x: complex, root: complex, c: complex) -> complex:
        """``int_x^c sqrt(D0)`` for a turning point or simple pole ``c``.

        The substitution ``t = c + (x - c) u^2`` removes the square-root
        endpoint behaviour, leaving a smooth integrand in ``u``.
        """
        u = 0.5 * (_GL_X + 1.0)
        w = 0.5 * _GL_W
        delta = x - c
        acc = 0.0
        # composite in u on geometrically graded panels toward u = 0
        edges = np.concatenate([[0.0], np.geomspace(1e-4, 1.0, 13)])
        for lo, hi in zip(edges[:-1], edges[1:]):
            uu = lo + (hi - lo) * u
            ww = (hi - lo) * w
            t = c + delta * uu**2
            d = np.asarray(self.d0(t), dtype=complex)
            # continue the root from x (u = 1) inward: sqrt(D0(t)) ~ root * (D0(t)/D0(x))^(1/2)
            ratio = np.sqrt(d / self.d0_value(x))
            acc += np.sum(ww * root * ratio * 2.0 * delta * uu)
        # the integral runs from x (u=1) to c (u=0)
        return -acc

    # -- flows -------------------------------------------------------------------
    def _flow_rhs(self, direction):
        def rhs(t, y):
            x, w = y[0], y[1]
            dx = direction / w
            return np.array([dx, self.dd0_value(x) / (2.0 * w) * dx])
        return rhs

    def flow_line(self, x, direction: complex, t_nodes, root=None, *, rtol=1e-12, atol=1e-14):
        """Points ``Phi^{-1}(Phi(x) + direction*t)`` for real ``t_nodes >= 0``.

        Returns ``(xs, roots)``; the root is carried as part of the ODE state
        and snapped to the nearest exact root at each output node.
        """
        x = complex(x)
        root = self.root_at(x) if root is None else complex(root)
        t_nodes = np.asarray(t_nodes, dtype=float)
        if not len(t_nodes):
            return np.zeros(0, complex), np.zeros(0, complex)
        if t_nodes[-1] == 0:
            return np.full(len(t_nodes), x), np.full(len(t_nodes), root)
        wmin = 1e-6 * max(1.0, abs(root))

        def near_critical(t, y):
            return abs(y[1]) - wmin
        near_critical.terminal = True

        sol = solve_ivp(self._flow_rhs(complex(direction)), (0.0, float(t_nodes[-1])),
                        np.array([x, root], dtype=complex), method="DOP853", t_eval=t_nodes,
                        rtol=rtol, atol=atol, events=near_critical)
        if sol.status != 0 or sol.y.shape[1] != len(t_nodes):
            raise FlowError(f"flow from {x} along {direction} stopped at t={sol.t[-1] if len(sol.t) else 0:.6g}: "
                            f"{sol.message}")
        xs = sol.y[0]
        if not np.all(np.isfinite(xs)):
            raise FlowError("non-finite flow")
        d = np.asarray(self.d0(xs), dtype=complex)
        r = np.sqrt(d)
        roots = np.where(np.abs(r - sol.y[1]) <= np.abs(r + sol.y[1]), r, -r)
        return xs, roots

    def inverse_phi(self, target: complex, guess: complex, root_guess: complex, *, tol=1e-13, maxiter=60):
        """Newton solve of ``Phi(x) = target`` by quadrature (independent of the flow ODE)."""
        x, r = complex(guess), complex(root_guess)
        base_x, base_r = self.x0, self.root0
        phi_x = self.liouville_eval(x) if base_x != x else 0j
        for _ in range(maxiter):
            step = (target - phi_x) / r
            x_new = x + step
            r_new = _nearest_root(self.d0_value(x_new), r)
            phi_x = phi_x + self.phi_between(x, x_new, r)
            x, r = x_new, r_new
            if abs(step) <= tol * (1 + abs(x)):
                break
        return x, r


def flow_map(frame: LiouvilleFrame, x, zeta, root=None, *, rtol=1e-12):
    """``x_zeta = Phi^{-1}(Phi(x) + zeta)`` by integrating ``dx/dt = zeta/sqrt(D0)`` on [0,1]."""
    zeta = complex(zeta)
    if zeta == 0:
        return complex(x)
    xs, _ = frame.flow_line(x, zeta, [0.0, 1.0], root=root, rtol=rtol)
    return complex(xs[-1])


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryHalf:
    theta: float
    sign: int
    sigma: np.ndarray  # arclength
    tau: np.ndarray
    x: np.ndarray
    root: np.ndarray
    z: np.ndarray  # Phi(x) - Phi(x_start)
    status: str
    end: CriticalPoint | None = None
    period: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def tau_end(self) -> float:
        return float(self.info.get("tau_end", self.tau[-1]))

    def rows(self):
        for t, x, z in zip(self.tau, self.x, self.z):
            yield (float(t), x.real, x.imag, z.real, z.imag, self.status)


@dataclass
class Trajectory:
    theta: float
    x_start: complex
    plus: TrajectoryHalf
    minus: TrajectoryHalf

    @property
    def status_plus(self) -> str:
        return self.plus.status

    @property
    def status_minus(self) -> str:
        return self.minus.status

    @property
    def period(self) -> float | None:
        return self.plus.period if self.plus.period is not None else self.minus.period

    @property
    def is_complete(self) -> bool:
        return self.plus.status.startswith("complete") and self.minus.status.startswith("complete")


def trace_trajectory(frame: LiouvilleFrame, x_start, theta: float, sign: int, *,
                     root=None, tau_max: float = math.inf, max_arclength: float = 1e7,
                     r_escape: float = 1e6, closure_tol: float = 1e-6, tp_radius: float = 1e-3,
                     rtol: float = 1e-12, atol: float = 1e-14, max_steps: int = 200000,
                     max_step: float = math.inf) -> TrajectoryHalf:
    """Trace the (theta, sign)-ray through ``x_start`` in arclength.

    State is ``(x, sqrt(D0), z)``; ``dx/ds = v/|v|`` with ``v = sign e^{i theta}/sqrt(D0)``
    so ``tau = Re(e^{-i theta} z)`` moves monotonically with unit-speed x.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    x_start = complex(x_start)
    w0 = frame.root_at(x_start) if root is None else complex(root)
    if abs(frame.d0_value(x_start)) == 0:
        raise GeometryError("trajectory start is a turning point")
    rot = np.exp(1j * theta)
    unrot = np.conj(rot)
    direction = sign * rot

    def rhs(s, y):
        x, w = y[0], y[1]
        v = direction / w
        dx = v / abs(v)
        return np.array([dx, frame.dd0_value(x) / (2.0 * w) * dx, w * dx])

    solver = DOP853(rhs, 0.0, np.array([x_start, w0, 0j]), max_arclength, rtol=rtol, atol=atol,
                    max_step=max_step)
    S, X, W, Z = [0.0], [x_start], [w0], [0j]
    status, end, period, info = "budget_exhausted", None, None, {}
    period_vec = frame.period
    departed = False
    scale = 1.0 + abs(x_start)
    skip_tp: set = set()

    def lattice_target(x):
        if period_vec is None:
            return x_start
        k = round(((x - x_start) / period_vec).real)
        return x_start + k * period_vec

    for _ in range(max_steps):
        if solver.status != "running":
            break
        msg = solver.step()
        if solver.status == "failed":
            info["message"] = msg
            status = "hit_turning_point" if frame.critical_distance(solver.y[0]) < 1e-2 * scale else "escaped_domain"
            break
        s_new, y = solver.t, solver.y
        x, w, z = y
        prev_s = S[-1]
        S.append(s_new), X.append(x), W.append(w), Z.append(z)
        tau = float((unrot * z).real)

        # closure: closest approach to x_start (or a periodic copy) within this step,
        # only once the previous step has already left its neighbourhood
        was_departed = departed
        if not departed and abs(x - lattice_target(x)) > 1e-3 * scale:
            departed = True
        if was_departed:
            dense = solver.dense_output()
            ss = np.linspace(prev_s, s_new, 9)
            ys = np.array([dense(t) for t in ss])
            dists = np.abs(ys[:, 0] - np.array([lattice_target(v) for v in ys[:, 0]]))
            i = int(np.argmin(dists))
            if dists[i] < max(1e-2 * scale, 10 * abs(X[-1] - X[-2])):
                lo, hi = ss[max(i - 1, 0)], ss[min(i + 1, len(ss) - 1)]
                tgt = lattice_target(ys[i, 0])
                res = minimize_scalar(lambda t: abs(dense(t)[0] - tgt) ** 2, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-14 * max(1.0, hi)})
                yc = dense(res.x)
                dist = abs(yc[0] - tgt)
                if dist < closure_tol * scale and abs(yc[1] - w0) < 1e-6 * max(1.0, abs(w0)):
                    # first-order correction of tau for the residual offset
                    zc = yc[2] + yc[1] * (tgt - yc[0])
                    S[-1], X[-1], W[-1], Z[-1] = res.x, yc[0], yc[1], zc
                    period = abs(float((unrot * zc).real))
                    status = "complete_closed"
                    info.update(closure_distance=dist, lattice_shift=complex(tgt - x_start))
                    break
        # turning points / simple poles
        hit = None
        for c in frame._turning + [cp for cp in frame.critical if cp.location is not None and cp.kind == "simple_pole"]:
            for loc in frame.images(c.location, x):
                key = (c.kind, round(loc.real, 9), round(loc.imag, 9))
                if key in skip_tp:
                    if abs(x - loc) > 4 * tp_radius * scale:
                        skip_tp.discard(key)
                    continue
                if abs(x - loc) < tp_radius * scale:
                    dz = frame.phi_to_critical(x, w, loc)
                    along = (unrot * dz * sign).real
                    if abs((unrot * dz).imag) <= 1e-8 * (1 + abs(tau)) and along >= 0:
                        hit = (c, loc, dz)
                        break
                    skip_tp.add(key)
            if hit:
                break
        if hit:
            c, loc, dz = hit
            status = "hit_turning_point" if c.kind == "turning_point" else "hit_simple_pole"
            end = CriticalPoint(loc, c.kind, c.order)
            info["tau_end"] = float((unrot * (z + dz)).real)
            info["distance_at_stop"] = abs(x - loc)
            break
        if abs(x) > r_escape:
            inf = next((c for c in frame.critical if c.location is None), None)
            if inf is not None and inf.kind == "infinite_critical":
                status, end = "complete_generic", inf
            else:
                status = "escaped_domain"
            break
        for c in frame.critical:
            if c.location is not None and c.kind == "infinite_critical" and abs(x - c.location) < 1e-6 * scale:
                status, end = "complete_generic", c
                break
        if status == "complete_generic":
            break
        if abs(tau) > tau_max:
            status = "budget_exhausted"
            break
    else:
        info["message"] = "step budget exhausted"
    if solver.status == "finished":
        info["message"] = "arclength budget exhausted"

    X, W, Z = np.array(X), np.array(W), np.array(Z)
    tau = (unrot * Z).real
    return TrajectoryHalf(theta, sign, np.array(S), tau, X, W, Z, status, end, period, info)


def trace_both(frame: LiouvilleFrame, x_start, theta: float, **kw) -> Trajectory:
    plus = trace_trajectory(frame, x_start, theta, +1, **kw)
    minus = trace_trajectory(frame, x_start, theta, -1, **kw)
    return Trajectory(theta, complex(x_start), plus, minus)
