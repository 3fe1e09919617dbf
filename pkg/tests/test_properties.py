from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from exactwkb.borel import apply_I, convolve
from exactwkb.coeffield import FieldElement, RationalFunction, X
from exactwkb.formal import ProblemSpec, characteristic_data, even_part_residual, riccati_residual, series_exp, series_log1p, wkb_recursion
from exactwkb.geometry import LiouvilleFrame, flow_map
from exactwkb.grammar import lower, parse_coeff, to_text
from exactwkb.laplace import filon_simpson_weights
from exactwkb.problems import builtin

small = st.integers(-4, 4)
fracs = st.fractions(min_value=-3, max_value=3, max_denominator=5)
polys = st.lists(small, min_size=1, max_size=3)
nonzero_polys = polys.filter(lambda c: any(c))
rationals = st.builds(lambda n, d: RationalFunction(n, d), polys, nonzero_polys)
D0 = X * X + 1


def elements():
    return st.builds(lambda a, b: FieldElement(a, b, D0), rationals, rationals)


@settings(max_examples=40, deadline=None)
@given(elements(), elements(), elements())
def test_field_distributive(u, v, w):
    assert (u + v) * w == u * w + v * w


@settings(max_examples=40, deadline=None)
@given(elements(), elements())
def test_field_norm_multiplicative_and_inverse(u, v):
    assert (u * v).norm() == u.norm() * v.norm()
    if not u.is_zero():
        assert u * u.inverse() == FieldElement.lift(1, D0)


@settings(max_examples=30, deadline=None)
@given(elements(), elements())
def test_field_leibniz(u, v):
    assert (u * v).derivative() == u.derivative() * v + u * v.derivative()


@st.composite
def specs(draw):
    p = [RationalFunction(draw(st.lists(small, max_size=2))) for _ in range(draw(st.integers(1, 3)))]
    q0 = RationalFunction(draw(st.lists(small, min_size=2, max_size=3)))
    q = [q0] + [RationalFunction(draw(st.lists(small, max_size=2))) for _ in range(draw(st.integers(0, 2)))]
    spec = ProblemSpec(p=p, q=q)
    if spec.d0.is_zero():
        spec = ProblemSpec(p=p, q=[q0 + 1] + q[1:])
    return spec


@settings(max_examples=15, deadline=None)
@given(specs())
def test_recursion_solves_riccati_exactly(spec):
    roots = wkb_recursion(spec, 4)
    d0, lp, lm = characteristic_data(spec)
    assert lp - lm == FieldElement.sqrt_d0(d0)
    for sign in (1, -1):
        assert all(c.is_zero() for c in riccati_residual(roots, sign))
    assert all(c.is_zero() for c in even_part_residual(roots))


exprs = st.recursive(
    st.sampled_from(["x", "h", "1", "2", "0.5", "3"]),
    lambda e: st.one_of(
        st.tuples(e, st.sampled_from(["+", "-", "*"]), e).map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
        st.tuples(e, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        e.map(lambda s: f"-({s})"),
    ),
    max_leaves=6,
)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_grammar_round_trip(text):
    e = parse_coeff(text)
    assert lower(to_text(e)) == lower(e)
    assert to_text(parse_coeff(to_text(e))) == to_text(e)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_series_log_inverts_exp(a):
    a = [0.0] + a
    e = series_exp(a)
    back = series_log1p([0.0] + e[1:])
    assert np.allclose(back[1:], a[1:], atol=1e-8 * (1 + max(map(abs, e))))


arrays = st.lists(st.floats(-10, 10), min_size=9, max_size=9).map(np.array)


@settings(max_examples=40, deadline=None)
@given(arrays, arrays, arrays, st.floats(-2, 2))
def test_convolution_commutative_bilinear(f, g, k, c):
    h = 0.1
    assert np.allclose(convolve(f, g, h), convolve(g, f, h))
    assert np.allclose(convolve(f + c * k, g, h), convolve(f, g, h) + c * convolve(k, g, h))


@settings(max_examples=30, deadline=None)
@given(arrays, arrays, st.floats(-2, 2), st.floats(0, 3))
def test_I_linear(f, g, c, theta):
    n = 8
    j, k = np.indices((n + 1, n + 1))
    F = np.where(j + k <= n, f[None, :] * (1 + j), 0)
    G = np.where(j + k <= n, g[None, :] - j, 0)
    assert np.allclose(apply_I(F + c * G, 0.1, theta), apply_I(F, 0.1, theta) + c * apply_I(G, 0.1, theta))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.floats(0.01, 1), st.floats(0, 50), st.floats(-50, 50))
def test_filon_integrates_exponential(m, h, kre, kim):
    # decaying or oscillating kernels, as in the Laplace transform
    kappa = complex(kre, kim)
    n = 2 * m
    w = filon_simpson_weights(n, h, kappa)
    L = n * h
    exact = L if kappa == 0 else -np.expm1(-kappa * L) / kappa
    assert abs(np.sum(w) - exact) <= 1e-9 * max(1.0, abs(exact))


AIRY_FRAME = LiouvilleFrame(builtin("airy"), 1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 2.0), st.floats(-0.5, 0.5))
def test_flow_map_round_trip(re, im):
    zeta = complex(re, im)
    x1 = flow_map(AIRY_FRAME, 1.0, zeta)
    assert abs(AIRY_FRAME.liouville_eval(x1) - zeta) < 1e-8
    assert abs(flow_map(AIRY_FRAME, x1, -zeta) - 1.0) < 1e-8
