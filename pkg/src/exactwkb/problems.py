"""Built-in problems and the conversion to Schrodinger form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from .coeffield import ExprFunction, RationalFunction, X
from .formal import ProblemSpec
from .grammar import lower

__all__ = [
    "CatalogEntry",
    "UnknownProblemError",
    "SchrodingerForm",
    "builtin",
    "check_fixtures",
    "catalog",
    "catalog_entry",
    "from_strings",
    "to_schrodinger",
]


class UnknownProblemError(KeyError):
    pass


@dataclass
class CatalogEntry:
    name: str
    build: Callable[..., ProblemSpec]
    defaults: dict
    x0: complex
    theta: float
    region: tuple
    expected_critical: list  # (location or None, kind, order)
    fixtures: dict = field(default_factory=dict)
    note: str = ""
    theta_minus: float | None = None  # lateral direction when the minus ray meets a turning point

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "params": {k: str(v) for k, v in self.defaults.items()},
            "x0": [self.x0.real, self.x0.imag],
            "theta": self.theta,
            "theta_minus": self.theta_minus,
            "region": [str(r) for r in self.region],
            "expected_critical": [
                {"location": None if loc is None else [complex(loc).real, complex(loc).imag], "kind": k, "order": m}
                for loc, k, m in self.expected_critical
            ],
            "fixtures": self.fixtures,
            "note": self.note,
        }


def _airy() -> ProblemSpec:
    return ProblemSpec(p=[0], q=[-X], name="airy")


def _weber(a=4) -> ProblemSpec:
    a = Fraction(a)
    return ProblemSpec(p=[0], q=[-(X * X - a)], name="weber", meta={"a": str(a)})


def _weber_deformed() -> ProblemSpec:
    return ProblemSpec(p=[0], q=[-(X * X - 4), RationalFunction.constant(-2)], name="weber_deformed")


def _mathieu(E=2) -> ProblemSpec:
    import sympy

    E = Fraction(E)
    x = ExprFunction.symbol()
    q0 = ExprFunction(-2 * (sympy.cos(x) - sympy.Rational(E.numerator, E.denominator)))
    crit = []
    if E > 1:
        # cos x = E has the solutions 2 pi k +- i arccosh(E)
        y = math.acosh(float(E))
        crit = [(1j * y, "turning_point", 1), (-1j * y, "turning_point", 1)]
    elif E < -1:
        y = math.acosh(-float(E))
        crit = [(math.pi + 1j * y, "turning_point", 1), (math.pi - 1j * y, "turning_point", 1)]
    else:
        t = math.acos(float(E))
        crit = [(t, "turning_point", 1), (-t, "turning_point", 1)]
    return ProblemSpec(p=[0], q=[q0], name="mathieu", period=2 * math.pi, critical_points=crit,
                       meta={"E": str(E)})


def _constant_q() -> ProblemSpec:
    return ProblemSpec(p=[0], q=[RationalFunction.constant(-1)], name="constant_q")


_AIRY_FIX = {
    # "rational"/"sqrt" give the plus-root coefficient as a + b sqrt(D0), D0 = 4x
    "s1": {"value": "1/(4x)", "rational": "1/(4*x)", "sqrt": "0", "provenance": "PAPER"},
    "s2": {"value": "-+5/(32 x^(5/2))", "rational": "0", "sqrt": "-5/(64*x^3)", "provenance": "PAPER"},
    "s3": {"value": "15/(64 x^4)", "rational": "15/(64*x^4)", "sqrt": "0", "provenance": "DERIVED",
           "note": "independent sympy order-by-order solve; the printed 35/64 does not satisfy the recursion"},
}

_CATALOG: dict[str, CatalogEntry] = {
    "airy": CatalogEntry("airy", _airy, {}, 1 + 0j, 0.0, (1, 2),
                         [(0j, "turning_point", 1), (None, "infinite_critical", 5)], _AIRY_FIX, theta_minus=0.3),
    "weber": CatalogEntry("weber", _weber, {"a": 4}, 3 + 0j, 0.0, (3, 4),
                          [(-2 + 0j, "turning_point", 1), (2 + 0j, "turning_point", 1),
                           (None, "infinite_critical", 6)], theta_minus=0.3),
    "weber_deformed": CatalogEntry("weber_deformed", _weber_deformed, {}, 3 + 0j, 0.0, (3, 4),
                                   [(-2 + 0j, "turning_point", 1), (2 + 0j, "turning_point", 1),
                                    (None, "infinite_critical", 6)],
                                   {"s1": {"value": "x/(2(x^2-4)) +- 1/sqrt(x^2-4)", "provenance": "DERIVED"}},
                                   theta_minus=0.3),
    "mathieu": CatalogEntry("mathieu", _mathieu, {"E": 2}, math.pi + 0j, math.pi / 2, (0, 2 * math.pi),
                            [(1j * math.acosh(2), "turning_point", 1), (-1j * math.acosh(2), "turning_point", 1),
                             (None, "essential", -1)],
                            note="transcendental coefficient; symbolic backend"),
    "constant_q": CatalogEntry("constant_q", _constant_q, {}, 0j, 0.0, (0, 1), [(None, "infinite_critical", 4)]),
}


def catalog() -> list[CatalogEntry]:
    return list(_CATALOG.values())


def catalog_entry(name: str) -> CatalogEntry:
    try:
        return _CATALOG[name]
    except KeyError:
        raise UnknownProblemError(f"unknown problem {name!r}; known: {sorted(_CATALOG)}") from None


def builtin(name: str, **params) -> ProblemSpec:
    """Construct a catalog problem, e.g. ``builtin("weber", a=4)``."""
    entry = catalog_entry(name)
    kw = {**entry.defaults, **params}
    unknown = set(kw) - set(entry.defaults)
    if unknown:
        raise ValueError(f"{name} does not take parameters {sorted(unknown)}")
    return entry.build(**kw)


def from_strings(p: str, q: str, name: str = "custom") -> ProblemSpec:
    """Problem from coefficient expressions in ``x`` and ``h``."""
    return ProblemSpec(p=lower(p) or [0], q=lower(q) or [0], name=name, meta={"p": p, "q": q})


@dataclass
class SchrodingerForm:
    """``h^2 u'' - Q u = 0`` with ``psi = exp(-(1/2h) int p) u``."""

    spec: ProblemSpec  # p = 0, q = -Q
    Q: list
    original: ProblemSpec

    def exponent(self, x, hbar, x0, n: int = 64) -> complex:
        """``-(1/(2h)) int_{x0}^x p(t, h) dt`` on the straight segment."""
        g, w = np.polynomial.legendre.leggauss(n)
        x, x0 = complex(x), complex(x0)
        t = x0 + 0.5 * (g + 1) * (x - x0)
        vals = self.original.p_value(t, hbar)
        return complex(-np.sum(0.5 * w * vals) * (x - x0) / (2 * hbar))

    def to_original(self, u, x, hbar, x0):
        return u * np.exp(self.exponent(x, hbar, x0))


def to_schrodinger(spec: ProblemSpec) -> SchrodingerForm:
    """``Q_k = 1/4 sum_i p_i p_{k-i} + 1/2 p'_{k-1} - q_k``."""
    n = max(2 * len(spec.p) - 1, len(spec.p) + 1, len(spec.q))
    Q = []
    for k in range(n):
        acc = spec.backend.constant(0)
        for i in range(k + 1):
            pi, pj = spec.p_k(i), spec.p_k(k - i)
            if not pi.is_zero() and not pj.is_zero():
                acc = acc + pi * pj * Fraction(1, 4)
        if k >= 1:
            acc = acc + spec.p_k(k - 1).derivative() * Fraction(1, 2)
        acc = acc - spec.q_k(k)
        Q.append(acc)
    while len(Q) > 1 and Q[-1].is_zero():
        Q.pop()
    new = ProblemSpec(p=[spec.backend.constant(0)], q=[-c for c in Q], name=f"{spec.name}_schrodinger",
                      period=spec.period, critical_points=spec.critical_points)
    return SchrodingerForm(new, Q, spec)


def check_fixtures(entry: CatalogEntry, roots) -> dict:
    """Compare the plus-root coefficients with the entry's exact fixtures (``a + b sqrt(D0)`` form)."""
    out = {}
    for key, fx in entry.fixtures.items():
        if "rational" not in fx or not key.startswith("s"):
            continue
        k = int(key[1:])
        if k > roots.order:
            continue
        c = roots.plus[k]
        ra, rb = lower(fx["rational"]), lower(fx["sqrt"])
        ea = ra[0] if ra else RationalFunction.constant(0)
        eb = rb[0] if rb else RationalFunction.constant(0)
        match = (c.a - ea).is_zero() and (c.b - eb).is_zero()
        out[key] = {"expected": fx["value"], "computed": str(c), "match": bool(match),
                    "provenance": fx["provenance"]}
    return out
