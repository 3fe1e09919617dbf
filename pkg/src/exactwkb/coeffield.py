"""Exact arithmetic for WKB coefficients.

Two coefficient backends share one duck-typed interface (``+ - * /``,
``derivative()``, ``is_zero()``, ``__call__`` for numeric evaluation and
``constant()`` for coercion):

* :class:`RationalFunction` -- dense polynomials over ``Fraction``; every
  operation returns a reduced fraction, so results are bit-exact.
* :class:`ExprFunction` -- a sympy expression in ``x``; used for
  coefficients such as ``cos(x)`` that are not rational.

:class:`FieldElement` lives in the quadratic extension ``K(sqrt(D0))`` over
either backend.
"""
from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "RationalFunction",
    "ExprFunction",
    "FieldElement",
    "FieldError",
    "ZeroDivisionFieldError",
    "MismatchedDiscriminantError",
    "PoleError",
    "TurningPointError",
    "X",
]


class FieldError(ArithmeticError):
    """Base class for errors raised by exact coefficient arithmetic."""


class ZeroDivisionFieldError(FieldError, ZeroDivisionError):
    pass


class MismatchedDiscriminantError(FieldError):
    pass


class PoleError(FieldError):
    pass


class TurningPointError(FieldError):
    pass


# ---------------------------------------------------------------------------
# dense polynomials: tuples of Fractions, ascending degree, no trailing zeros
# ---------------------------------------------------------------------------

Poly = tuple


def _trim(c: Iterable) -> Poly:
    c = [Fraction(v) for v in c]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _padd(a: Poly, b: Poly) -> Poly:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, v in enumerate(b):
        out[i] += v
    return _trim(out)


def _pneg(a: Poly) -> Poly:
    return tuple(-v for v in a)


def _pmul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return ()
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u == 0:
            continue
        for j, v in enumerate(b):
            out[i + j] += u * v
    return _trim(out)


def _pscale(a: Poly, s: Fraction) -> Poly:
    if s == 0:
        return ()
    return tuple(v * s for v in a)


def _pdivmod(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    if not b:
        raise ZeroDivisionFieldError("polynomial division by zero")
    r = list(a)
    db = len(b) - 1
    lead = b[-1]
    q = [Fraction(0)] * max(len(a) - db, 0)
    while len(r) - 1 >= db and r:
        k = len(r) - 1 - db
        f = r[-1] / lead
        q[k] = f
        for i, v in enumerate(b):
            r[i + k] -= f * v
        r.pop()
        while r and r[-1] == 0:
            r.pop()
    return _trim(q), tuple(r)


def _monic(a: Poly) -> Poly:
    if not a:
        return a
    return _pscale(a, 1 / a[-1])


def _content_primitive(a: Poly) -> Poly:
    """Scale to integer coefficients with gcd 1 (keeps Euclid's numbers small)."""
    if not a:
        return a
    from math import gcd, lcm

    den = 1
    for v in a:
        den = lcm(den, v.denominator)
    ints = [int(v * den) for v in a]
    g = 0
    for v in ints:
        g = gcd(g, v)
    return tuple(Fraction(v // g) for v in ints)


def _pgcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd via Euclid on primitive parts."""
    a = _content_primitive(a)
    b = _content_primitive(b)
    while b:
        _, r = _pdivmod(a, b)
        a, b = b, _content_primitive(r)
    return _monic(a)


def _pderiv(a: Poly) -> Poly:
    return _trim(i * v for i, v in enumerate(a) if i > 0)


def _pfmt(a: Poly) -> str:
    if not a:
        return "0"
    terms = []
    for k in range(len(a) - 1, -1, -1):
        c = a[k]
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        c = abs(c)
        if k == 0:
            body = _numfmt(c)
        else:
            mono = "x" if k == 1 else f"x^{k}"
            body = mono if c == 1 else f"{_numfmt(c)}*{mono}"
        terms.append((sign, body))
    first_sign, first = terms[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


def _numfmt(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


class RationalFunction:
    """Reduced quotient of two polynomials in ``x`` over the rationals.

    The denominator is kept monic and coprime to the numerator; zero is
    represented as ``0/1``.
    """

    __slots__ = ("num", "den", "__dict__")

    def __init__(self, num: Sequence = (), den: Sequence = (1,), *, _reduced: bool = False):
        num = _trim(num)
        den = _trim(den)
        if not den:
            raise ZeroDivisionFieldError("rational function with zero denominator")
        if not _reduced:
            if not num:
                den = (Fraction(1),)
            else:
                g = _pgcd(num, den)
                if len(g) > 1:
                    num = _pdivmod(num, g)[0]
                    den = _pdivmod(den, g)[0]
                lead = den[-1]
                if lead != 1:
                    num = _pscale(num, 1 / lead)
                    den = _pscale(den, 1 / lead)
        self.num = num
        self.den = den

    # -- construction ------------------------------------------------------
    @classmethod
    def constant(cls, c) -> "RationalFunction":
        c = Fraction(c)
        return cls((c,), (1,), _reduced=True) if c else cls((), (1,), _reduced=True)

    @classmethod
    def polynomial(cls, coeffs: Sequence) -> "RationalFunction":
        return cls(coeffs, (1,), _reduced=True)

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Rational)):
            return RationalFunction.constant(other)
        return NotImplemented

    # -- predicates ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return len(self.num) <= 1 and len(self.den) == 1

    def is_polynomial(self) -> bool:
        return len(self.den) == 1

    @property
    def degree(self) -> int:
        """deg(num) - deg(den); ``-inf`` style sentinel (None) for zero."""
        if not self.num:
            return None
        return len(self.num) - len(self.den)

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other.num:
            return self
        if not self.num:
            return other
        if self.den == other.den:
            return RationalFunction(_padd(self.num, other.num), self.den)
        num = _padd(_pmul(self.num, other.den), _pmul(other.num, self.den))
        return RationalFunction(num, _pmul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(_pneg(self.num), self.den, _reduced=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not self.num or not other.num:
            return RationalFunction.constant(0)
        if other.is_constant():
            return RationalFunction(_pscale(self.num, other.num[0]), self.den, _reduced=True)
        if self.is_constant():
            return RationalFunction(_pscale(other.num, self.num[0]), other.den, _reduced=True)
        # cross-cancel so the product is already reduced
        g1 = _pgcd(self.num, other.den)
        g2 = _pgcd(other.num, self.den)
        a = _pdivmod(self.num, g1)[0] if len(g1) > 1 else self.num
        d = _pdivmod(other.den, g1)[0] if len(g1) > 1 else other.den
        c = _pdivmod(other.num, g2)[0] if len(g2) > 1 else other.num
        b = _pdivmod(self.den, g2)[0] if len(g2) > 1 else self.den
        num = _pmul(a, c)
        den = _pmul(b, d)
        lead = den[-1]
        if lead != 1:
            num = _pscale(num, 1 / lead)
            den = _pscale(den, 1 / lead)
        return RationalFunction(num, den, _reduced=True)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        if not self.num:
            raise ZeroDivisionFieldError("inverse of the zero rational function")
        lead = self.num[-1]
        return RationalFunction(_pscale(self.den, 1 / lead), _pscale(self.num, 1 / lead), _reduced=True)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        out = RationalFunction.constant(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def derivative(self) -> "RationalFunction":
        n, d = self.num, self.den
        if not n:
            return self
        if len(d) == 1:
            return RationalFunction(_pderiv(n), d, _reduced=True)
        num = _padd(_pmul(_pderiv(n), d), _pneg(_pmul(n, _pderiv(d))))
        return RationalFunction(num, _pmul(d, d))

    # -- comparison -------------------------------------------------------------
    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    # -- numeric evaluation ------------------------------------------------------
    @cached_property
    def _np(self):
        # numpy.polyval wants descending order
        num = np.array([float(v) for v in reversed(self.num)] or [0.0])
        den = np.array([float(v) for v in reversed(self.den)])
        return num, den

    def __call__(self, x):
        """Evaluate at ``x`` (scalar or array, real or complex).

        Raises :class:`PoleError` if the denominator vanishes.
        """
        if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
            num = sum((c * Fraction(x) ** k for k, c in enumerate(self.num)), Fraction(0))
            den = sum((c * Fraction(x) ** k for k, c in enumerate(self.den)), Fraction(0))
            if den == 0:
                raise PoleError(f"pole of {self} at x={x}")
            return num / den
        num_c, den_c = self._np
        xa = np.asarray(x)
        den = np.polyval(den_c, xa)
        if np.any(den == 0):
            raise PoleError(f"pole of {self} at x={x}")
        out = np.polyval(num_c, xa) / den
        return out if out.ndim else out[()]

    # -- structure -----------------------------------------------------------------
    def numerator_roots(self) -> np.ndarray:
        return _roots(self.num)

    def denominator_roots(self) -> np.ndarray:
        return _roots(self.den)

    def factor_orders(self) -> tuple[list[tuple[complex, int]], list[tuple[complex, int]]]:
        """Distinct roots with multiplicities of numerator and denominator."""
        return _root_orders(self.num), _root_orders(self.den)

    def __str__(self):
        if len(self.den) == 1:
            return _pfmt(self.num)
        n = _pfmt(self.num)
        if len([v for v in self.num if v != 0]) > 1:
            n = f"({n})"
        return f"{n}/({_pfmt(self.den)})"

    def __repr__(self):
        return f"RationalFunction({self})"


def _roots(p: Poly) -> np.ndarray:
    if len(p) <= 1:
        return np.array([], dtype=complex)
    return np.roots([float(v) for v in reversed(p)]).astype(complex)


def _root_orders(p: Poly) -> list[tuple[complex, int]]:
    """Distinct roots with multiplicity via square-free factorisation."""
    out: list[tuple[complex, int]] = []
    if len(p) <= 1:
        return out
    # Yun's algorithm over Q gives exact multiplicities
    f = _monic(p)
    fp = _pderiv(f)
    a = _pgcd(f, fp)
    b = _pdivmod(f, a)[0]
    c = _pdivmod(fp, a)[0]
    d = _padd(c, _pneg(_pderiv(b)))
    i = 1
    while len(b) > 1:
        g = _pgcd(b, d)
        if len(g) > 1:
            for r in _roots(g):
                out.append((complex(r), i))
        b = _pdivmod(b, g)[0]
        c = _pdivmod(d, g)[0]
        d = _padd(c, _pneg(_pderiv(b)))
        i += 1
    return out


X = RationalFunction.polynomial((0, 1))


# ---------------------------------------------------------------------------
# transcendental backend
# ---------------------------------------------------------------------------

class ExprFunction:
    """Coefficient backed by a sympy expression in the symbol ``x``.

    Arithmetic is symbolic (so derivatives stay exact) and expressions are
    passed through ``sympy.cancel`` to limit swell. Numeric evaluation goes
    through a cached ``lambdify``.
    """

    __slots__ = ("expr", "__dict__")

    def __init__(self, expr):
        import sympy

        self.expr = sympy.sympify(expr)

    @staticmethod
    def symbol():
        import sympy

        return sympy.Symbol("x")

    @classmethod
    def constant(cls, c) -> "ExprFunction":
        import sympy

        return cls(sympy.Rational(Fraction(c).numerator, Fraction(c).denominator))

    def _coerce(self, other):
        if isinstance(other, ExprFunction):
            return other
        if isinstance(other, RationalFunction):
            return ExprFunction.from_rational(other)
        if isinstance(other, (int, Rational)):
            return ExprFunction.constant(other)
        return NotImplemented

    @classmethod
    def from_rational(cls, r: RationalFunction) -> "ExprFunction":
        import sympy

        x = cls.symbol()
        num = sum(sympy.Rational(c.numerator, c.denominator) * x**k for k, c in enumerate(r.num))
        den = sum(sympy.Rational(c.numerator, c.denominator) * x**k for k, c in enumerate(r.den))
        return cls(num / den)

    def _wrap(self, e):
        import sympy

        return ExprFunction(sympy.cancel(e))

    def is_zero(self) -> bool:
        import sympy

        if self.expr == 0:
            return True
        return sympy.simplify(self.expr) == 0

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap(self.expr + other.expr)

    __radd__ = __add__

    def __neg__(self):
        return ExprFunction(-self.expr)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap(self.expr - other.expr)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap(self.expr * other.expr)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.expr == 0:
            raise ZeroDivisionFieldError("division by zero expression")
        return self._wrap(self.expr / other.expr)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, n: int):
        return self._wrap(self.expr**n)

    def inverse(self):
        return ExprFunction.constant(1) / self

    def derivative(self) -> "ExprFunction":
        return self._wrap(self.expr.diff(self.symbol()))

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return (self - other).is_zero()

    def __hash__(self):
        return hash(self.expr)

    @cached_property
    def _fn(self):
        import sympy

        return sympy.lambdify(self.symbol(), self.expr, modules="numpy")

    def __call__(self, x):
        xa = np.asarray(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._fn(xa)
        out = np.broadcast_to(np.asarray(out), xa.shape).copy() if np.ndim(out) < xa.ndim else np.asarray(out)
        if not np.all(np.isfinite(out)):
            raise PoleError(f"non-finite value of {self.expr} at x={x}")
        return out if out.ndim else out[()]

    def __str__(self):
        return str(self.expr)

    def __repr__(self):
        return f"ExprFunction({self.expr})"


# ---------------------------------------------------------------------------
# quadratic extension
# ---------------------------------------------------------------------------

class FieldElement:
    """Element ``a + b*sqrt(D0)`` of the quadratic extension over ``D0``.

    ``a``, ``b`` and ``d0`` share a backend (RationalFunction or
    ExprFunction). Elements over different ``D0`` never mix.
    """

    __slots__ = ("a", "b", "d0")

    def __init__(self, a, b, d0):
        self.a = a
        self.b = b
        self.d0 = d0

    @classmethod
    def sqrt_d0(cls, d0) -> "FieldElement":
        return cls(d0.constant(0), d0.constant(1), d0)

    @classmethod
    def lift(cls, a, d0) -> "FieldElement":
        """Embed a base-field element (or number) with zero sqrt-part."""
        if not hasattr(a, "derivative"):
            a = d0.constant(a)
        elif type(a) is not type(d0):
            a = d0._coerce(a)
        return cls(a, d0.constant(0), d0)

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.d0 is not self.d0 and other.d0 != self.d0:
                raise MismatchedDiscriminantError("field elements over different D0")
            return other
        if isinstance(other, (int, Rational, RationalFunction, ExprFunction)):
            return FieldElement.lift(other, self.d0)
        return NotImplemented

    def is_zero(self) -> bool:
        return self.a.is_zero() and self.b.is_zero()

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.a + other.a, self.b + other.b, self.d0)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(-self.a, -self.b, self.d0)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.a - other.a, self.b - other.b, self.d0)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b, c, d = self.a, self.b, other.a, other.b
        if b.is_zero() and d.is_zero():
            return FieldElement(a * c, b, self.d0)
        return FieldElement(a * c + b * d * self.d0, a * d + b * c, self.d0)

    __rmul__ = __mul__

    def conjugate(self) -> "FieldElement":
        """Image under ``sqrt(D0) -> -sqrt(D0)``."""
        return FieldElement(self.a, -self.b, self.d0)

    def norm(self):
        return self.a * self.a - self.b * self.b * self.d0

    def inverse(self) -> "FieldElement":
        if self.b.is_zero():
            if self.a.is_zero():
                raise ZeroDivisionFieldError("inverse of zero field element")
            return FieldElement(self.a.inverse(), self.b, self.d0)
        n = self.norm()
        if n.is_zero():
            raise ZeroDivisionFieldError("field element has zero norm a^2 - b^2 D0")
        return FieldElement(self.a / n, -self.b / n, self.d0)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = FieldElement.lift(1, self.d0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def derivative(self) -> "FieldElement":
        # d/dx sqrt(D0) = D0'/(2 D0) sqrt(D0)
        da = self.a.derivative()
        if self.b.is_zero():
            return FieldElement(da, self.b, self.d0)
        db = self.b.derivative() + self.b * self.d0.derivative() / (self.d0 * 2)
        return FieldElement(da, db, self.d0)

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except MismatchedDiscriminantError:
            return False
        if other is NotImplemented:
            return False
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.a, self.b))

    # -- numeric evaluation -----------------------------------------------
    def evaluate(self, x, branch: int = 1):
        """``a(x) + branch*sqrt(D0(x))*b(x)`` with the principal square root."""
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        a = self.a(x)
        if self.b.is_zero():
            return a + 0j
        d = np.asarray(self.d0(x), dtype=complex)
        if np.any(d == 0):
            raise TurningPointError(f"D0 vanishes at x={x}; sqrt-part is branched there")
        return a + branch * np.sqrt(d) * self.b(x)

    def evaluate_with_root(self, x, root):
        """Evaluate with an explicitly supplied value ``root`` of sqrt(D0(x))."""
        a = self.a(x)
        if self.b.is_zero():
            return np.asarray(a, dtype=complex) + 0 * np.asarray(root)
        return a + root * self.b(x)

    def to_json(self) -> dict[str, str]:
        return {"a": str(self.a), "b": str(self.b)}

    def __str__(self):
        return f"({self.a}) + ({self.b})*sqrt(D0)"

    def __repr__(self):
        return f"FieldElement({self}; D0={self.d0})"


def eval_field(e: FieldElement, x, branch: int = 1):
    """Module-level alias of :meth:`FieldElement.evaluate`."""
    return e.evaluate(x, branch)
