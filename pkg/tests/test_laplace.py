import math

import numpy as np
import pytest
from scipy.integrate import quad

from exactwkb.laplace import (
    BorelDiscError,
    ExactSolution,
    TailBoundError,
    exact_wkb,
    filon_simpson_weights,
    laplace_transform,
    wronskian,
)
from exactwkb.problems import builtin
from exactwkb.validate import ode_residual_check


def test_filon_reduces_to_simpson():
    n, h = 10, 0.1
    w = filon_simpson_weights(n, h, 0.0)
    simpson = np.array([1] + [4, 2] * (n // 2 - 1) + [4, 1]) * h / 3
    assert np.allclose(w, simpson)


def test_filon_exact_for_quadratics():
    h, kappa = 0.3, 7.0 - 2.0j
    w = filon_simpson_weights(2, h, kappa)
    r = h * np.arange(3)
    for f in (lambda t: 1 + 0 * t, lambda t: t, lambda t: t * t):
        re = quad(lambda t: (f(t) * np.exp(-kappa * t)).real, 0, 2 * h, epsabs=1e-15)[0]
        im = quad(lambda t: (f(t) * np.exp(-kappa * t)).imag, 0, 2 * h, epsabs=1e-15)[0]
        assert abs(np.sum(w * f(r)) - (re + 1j * im)) < 1e-13


def test_filon_rejects_odd_panels():
    with pytest.raises(ValueError):
        filon_simpson_weights(5, 0.1, 1.0)


def test_laplace_of_constant_is_hbar():
    # int_0^inf e^{-xi/hbar} dxi = hbar
    hb = 0.2
    n, Xi = 200, 40 * hb
    lv = laplace_transform(np.ones(n + 1), Xi / n, 0.0, hb)
    assert abs(lv.value - hb) < 1e-12 + lv.tail_bound


def test_laplace_rotated_direction():
    # int along e^{i theta} of e^{-xi/hbar} xi equals hbar^2 whenever it converges
    hb, theta = 0.1 * np.exp(0.2j), 0.4
    n, Xi = 400, 60 * abs(hb)
    r = Xi / n * np.arange(n + 1)
    lv = laplace_transform(np.exp(1j * theta) * r, Xi / n, theta, hb)
    assert abs(lv.value - hb**2) < 1e-10


def test_euler_value_against_quad():
    hb, n = 0.1, 400
    h = 40 * hb / n
    r = h * np.arange(n + 1)
    val = laplace_transform(1 / (1 + r), h, 0.0, hb).value.real
    ref = quad(lambda t: math.exp(-t / hb) / (1 + t), 0, np.inf, epsrel=1e-13)[0]
    assert abs(val - ref) < 1e-6 * ref


def test_outside_disc_refused():
    with pytest.raises(BorelDiscError):
        laplace_transform(np.ones(11), 0.1, 0.0, -0.1)
    with pytest.raises(BorelDiscError):
        laplace_transform(np.ones(11), 0.1, math.pi / 2, 0.1)
    # growth e^{5 xi} needs Re(1/hbar) > 5/0.9
    r = 0.05 * np.arange(41)
    with pytest.raises(BorelDiscError):
        laplace_transform(np.exp(5 * r), 0.05, 0.0, 0.19)


def test_tail_bound_error():
    with pytest.raises(TailBoundError):
        laplace_transform(np.ones(11), 0.01, 0.0, 1.0, tol=1e-8)


@pytest.fixture(scope="module")
def const_solution():
    return ExactSolution(builtin("constant_q"), 0.0, theta=0.0)


def test_constant_q_exact_solutions(const_solution):
    hb = 0.1
    for x in (0.3, 0.5, 1.0):
        pp, pm = exact_wkb(const_solution, x, hb)
        assert abs(pp - math.exp(-x / hb)) < 1e-12 * math.exp(-x / hb)
        assert abs(pm - math.exp(x / hb)) < 1e-12 * math.exp(x / hb)


def test_constant_q_wronskian(const_solution):
    w = wronskian(const_solution, 0.5, 0.1)
    assert abs(w["normalized"] - 2) < 1e-12
    assert abs(w["normalized"] - w["sqrt_d0"]) < 1e-12


def test_normalisation_at_basepoint(airy_solution):
    for a in (1, -1):
        assert abs(airy_solution.psi(a, 1.0, 0.1) - 1) < 1e-14


def test_exact_root_leading_order(airy_solution):
    # s_+ = sqrt(x) + hbar/(4x) + O(hbar^2)
    x, hb = 1.5, 0.02
    s = airy_solution.s(1, x, hb)
    assert abs(s - math.sqrt(x) - hb / (4 * x)) < 2 * 5 / 32 * x**-2.5 * hb**2


def test_exact_solution_solves_ode(airy_solution):
    hb = 0.1
    psi = lambda x: airy_solution.psi(1, x, hb, x_far=1.8)
    scale = ode_residual_check(airy_solution.spec, psi, [1.3, 1.6], hb)
    assert scale < 1e-5
