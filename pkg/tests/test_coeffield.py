from fractions import Fraction

import numpy as np
import pytest
import sympy

from exactwkb.coeffield import (
    ExprFunction,
    FieldElement,
    MismatchedDiscriminantError,
    PoleError,
    RationalFunction,
    X,
    ZeroDivisionFieldError,
)


def rf(num, den=(1,)):
    return RationalFunction(num, den)


def test_rational_function_is_reduced():
    r = rf((-4, 0, 1), (2, 1))  # (x^2 - 4)/(x + 2)
    assert r == rf((-2, 1))
    assert r.is_polynomial()


def test_rational_arithmetic_matches_sympy():
    x = sympy.symbols("x")
    a = (X * X + 1) / (X - 3)
    b = 2 / (X * X + X)
    sa = (x**2 + 1) / (x - 3)
    sb = 2 / (x**2 + x)
    for ours, ref in [(a + b, sa + sb), (a * b, sa * sb), (a / b, sa / sb), (a - b, sa - sb),
                      (a.derivative(), sympy.diff(sa, x)), (a**3, sa**3)]:
        for pt in (Fraction(1, 2), Fraction(7, 3), Fraction(5)):
            assert ours(pt) == Fraction(str(ref.subs(x, sympy.Rational(str(pt)))))


def test_evaluation_at_pole_raises():
    with pytest.raises(PoleError):
        (1 / X)(0)
    with pytest.raises(PoleError):
        (1 / X)(np.array([1.0, 0.0]))


def test_evaluation_vectorised_complex():
    r = (X * X - 1) / (X + 2)
    z = np.array([0.5 + 1j, -1.3j, 3.0])
    assert np.allclose(r(z), (z**2 - 1) / (z + 2))


def test_zero_denominator_rejected():
    with pytest.raises(ZeroDivisionFieldError):
        rf((1,), ())
    with pytest.raises(ZeroDivisionFieldError):
        RationalFunction.constant(0).inverse()


def test_sqrt_d0_squares_to_d0():
    d0 = X * 4
    r = FieldElement.sqrt_d0(d0)
    sq = r * r
    assert sq.b.is_zero() and sq.a == d0


def test_derivative_of_sqrt_d0():
    d0 = X * X - 4
    r = FieldElement.sqrt_d0(d0)
    # d/dx sqrt(x^2 - 4) = x/sqrt(x^2 - 4) = x/(x^2 - 4) sqrt(D0)
    assert r.derivative() == FieldElement(RationalFunction.constant(0), X / d0, d0)


def test_field_inverse_and_division():
    d0 = X * 4
    u = FieldElement(X + 1, 1 / X, d0)
    one = u * u.inverse()
    assert one == FieldElement.lift(1, d0)
    v = FieldElement(X, RationalFunction.constant(3), d0)
    assert (u / v) * v == u


def test_field_product_rule():
    d0 = X * X + 1
    u = FieldElement(X, 1 / (X + 2), d0)
    v = FieldElement(1 / X, X, d0)
    assert (u * v).derivative() == u.derivative() * v + u * v.derivative()


def test_field_numeric_evaluation_with_branch():
    d0 = X * 4
    u = FieldElement(1 / X, RationalFunction.constant(2), d0)
    assert np.isclose(u.evaluate_with_root(1.0, 2.0), 1 + 4)
    assert np.isclose(u.evaluate_with_root(1.0, -2.0), 1 - 4)


def test_mixed_discriminants_rejected():
    with pytest.raises(MismatchedDiscriminantError):
        FieldElement.sqrt_d0(X * 4) + FieldElement.sqrt_d0(X * 3)


def test_zero_inverse_rejected():
    with pytest.raises(ZeroDivisionFieldError):
        FieldElement.lift(0, X).inverse()


def test_expr_backend_agrees_with_rational():
    r = (X * X + 1) / (X - 3)
    e = ExprFunction.from_rational(r)
    assert np.isclose(complex(e(1.5)), complex(r(1.5)))
    assert np.isclose(complex(e.derivative()(1.5)), complex(r.derivative()(1.5)))
    assert (e - ExprFunction.from_rational(r)).is_zero()
