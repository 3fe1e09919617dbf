import pytest

from exactwkb.coeffield import RationalFunction, X
from exactwkb.grammar import CoeffSyntaxError, NonPolynomialError, evaluate, lower, parse_coeff, to_text


def test_lower_splits_h_powers():
    cs = lower("x^2 - 4 + 2*h - h^2*x/3")
    assert cs == [X * X - 4, RationalFunction.constant(2), -X / 3]


def test_decimals_are_exact():
    assert lower("0.25*x") == [X / 4]


def test_cancellation_is_exact():
    assert lower("(x^2-4)/(x+2)") == [X - 2]


def test_negative_power_of_x():
    assert lower("x^-2") == [1 / (X * X)]


@pytest.mark.parametrize("text", ["x+", "2*(x", "x @ 2", ")", ""])
def test_syntax_errors_report_position(text):
    with pytest.raises(CoeffSyntaxError) as err:
        parse_coeff(text)
    assert "position" in str(err.value)


@pytest.mark.parametrize("text", ["1/h", "h^-1", "x/(1+h)"])
def test_h_in_denominator_rejected(text):
    with pytest.raises(NonPolynomialError):
        lower(text)


@pytest.mark.parametrize("text", ["x^2 - 4 + 2*h", "-(x+1)^3/(x-2) + h*x", "h^2*(1/x - 3.5)", "-x^-1*-h"])
def test_round_trip_and_lowering_agree(text):
    e = parse_coeff(text)
    assert lower(parse_coeff(to_text(e))) == lower(e)
    x, h = 0.7 + 0.2j, 0.13
    direct = evaluate(e, x, h)
    via = sum(complex(c(x)) * h**k for k, c in enumerate(lower(e)))
    assert abs(direct - via) < 1e-12 * max(1, abs(direct))
