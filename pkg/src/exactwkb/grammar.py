"""Coefficient expression grammar.

::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | "+" unary | power
    power  := atom ("^" ["-"] INTEGER)?
    atom   := NUMBER | "x" | "h" | "(" expr ")"
    NUMBER := digits ["." digits]         (decimals become exact ratios)

``h`` stands for the small parameter. :func:`lower` turns an expression
into the list of its ``h``-coefficients as exact rational functions of ``x``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .coeffield import RationalFunction, X

__all__ = [
    "CoeffExpr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "CoeffSyntaxError",
    "NonPolynomialError",
    "parse_coeff",
    "lower",
    "to_text",
]


class CoeffSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.position = position
        self.text = text


class NonPolynomialError(ValueError):
    """The expression is not polynomial in ``h``."""


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "CoeffExpr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "CoeffExpr"
    right: "CoeffExpr"


@dataclass(frozen=True)
class Pow:
    base: "CoeffExpr"
    exponent: int


CoeffExpr = Union[Num, Var, Neg, BinOp, Pow]

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?|\.\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")
_VARIABLES = {"x", "h"}


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            toks.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            name = m.group(2)
            if name not in _VARIABLES:
                raise CoeffSyntaxError(f"unknown identifier {name!r}", start, text)
            toks.append(("var", name, start))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise CoeffSyntaxError(f"unexpected character {ch!r}", start, text)
            toks.append(("op", ch, start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg):
        raise CoeffSyntaxError(msg, self.peek()[2], self.text)

    def expect(self, value):
        kind, v, _ = self.peek()
        if kind != "op" or v != value:
            self.fail(f"expected {value!r}")
        self.take()

    def parse(self) -> CoeffExpr:
        if self.peek()[0] == "end":
            self.fail("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and v == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, v, _ = self.peek()
            if kind != "num" or "." in v:
                self.fail("exponent must be an integer")
            self.take()
            return Pow(base, sign * int(v))
        return base

    def atom(self):
        kind, v, _ = self.peek()
        if kind == "num":
            self.take()
            return Num(Fraction(v))
        if kind == "var":
            self.take()
            return Var(v)
        if kind == "op" and v == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expected a number, variable or '('")


def parse_coeff(text: str) -> CoeffExpr:
    """Parse ``text`` into a :data:`CoeffExpr` tree."""
    return _Parser(text).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: CoeffExpr) -> str:
    """Canonical printer; its output re-parses to a tree with the same text."""
    return _fmt(e, 0)


def _fmt(e: CoeffExpr, ctx: int) -> str:
    if isinstance(e, Num):
        v = e.value
        s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return f"({s})" if (v.denominator != 1 and ctx > 2) else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        s = "-" + _fmt(e.operand, 3)
        return f"({s})" if ctx >= 1 else s
    if isinstance(e, Pow):
        base = _fmt(e.base, 4)
        if isinstance(e.base, Pow):  # the grammar has no chained ^
            base = f"({base})"
        return f"{base}^{e.exponent}"
    p = _PREC[e.op]
    left = _fmt(e.left, p)
    # right operand of a non-commutative op binds tighter
    right = _fmt(e.right, p + 1)
    s = f"{left} {e.op} {right}" if p == 1 else f"{left}{e.op}{right}"
    return f"({s})" if ctx > p else s


# ---------------------------------------------------------------------------
# lowering to h-polynomials over Q(x)
# ---------------------------------------------------------------------------

HPoly = list  # list[RationalFunction], index = power of h


def _htrim(p: HPoly) -> HPoly:
    p = list(p)
    while p and p[-1].is_zero():
        p.pop()
    return p


def _hadd(a: HPoly, b: HPoly) -> HPoly:
    n = max(len(a), len(b))
    zero = RationalFunction.constant(0)
    return _htrim([(a[i] if i < len(a) else zero) + (b[i] if i < len(b) else zero) for i in range(n)])


def _hmul(a: HPoly, b: HPoly) -> HPoly:
    if not a or not b:
        return []
    out = [RationalFunction.constant(0)] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u.is_zero():
            continue
        for j, v in enumerate(b):
            out[i + j] = out[i + j] + u * v
    return _htrim(out)


def _lower(e: CoeffExpr) -> HPoly:
    if isinstance(e, Num):
        return _htrim([RationalFunction.constant(e.value)])
    if isinstance(e, Var):
        if e.name == "x":
            return [X]
        return [RationalFunction.constant(0), RationalFunction.constant(1)]
    if isinstance(e, Neg):
        return [-c for c in _lower(e.operand)]
    if isinstance(e, Pow):
        base = _lower(e.base)
        n = e.exponent
        if n < 0:
            if len(base) > 1:
                raise NonPolynomialError("negative power of an h-dependent expression")
            if not base:
                raise ZeroDivisionError("zero raised to a negative power")
            return [base[0] ** n]
        out = [RationalFunction.constant(1)]
        for _ in range(n):
            out = _hmul(out, base)
        return out
    left, right = _lower(e.left), _lower(e.right)
    if e.op == "+":
        return _hadd(left, right)
    if e.op == "-":
        return _hadd(left, [-c for c in right])
    if e.op == "*":
        return _hmul(left, right)
    if len(right) > 1:
        raise NonPolynomialError("division by an h-dependent expression")
    if not right:
        raise ZeroDivisionError("division by zero in coefficient expression")
    inv = right[0].inverse()
    return _htrim([c * inv for c in left])


def lower(expr: CoeffExpr | str) -> list[RationalFunction]:
    """Coefficients of ``h^0, h^1, ...`` with trailing zeros trimmed.

    >>> [str(c) for c in lower("x^2 - 4 + 2*h")]
    ['x^2 - 4', '2']
    """
    if isinstance(expr, str):
        expr = parse_coeff(expr)
    return _lower(expr)


def evaluate(expr: CoeffExpr, x, h=0):
    """Direct numeric evaluation of the tree (independent of :func:`lower`)."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return x if expr.name == "x" else h
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, x, h)
    if isinstance(expr, Pow):
        return evaluate(expr.base, x, h) ** expr.exponent
    a, b = evaluate(expr.left, x, h), evaluate(expr.right, x, h)
    return {"+": a + b, "-": a - b, "*": a * b}[expr.op] if expr.op != "/" else a / b
