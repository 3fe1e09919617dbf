import math

import numpy as np
import pytest

from exactwkb.borel import (
    BorelDivergenceError,
    apply_I,
    bound_fit,
    convolve,
    flow_grid,
    integral_equation_residual,
    solve_borel,
    standard_form,
    successive_approx_check,
    tau_march,
    tau_recursion,
)
from exactwkb.coeffield import FieldElement
from exactwkb.formal import formal_borel, wkb_recursion
from exactwkb.geometry import LiouvilleFrame
from exactwkb.problems import builtin, from_strings


def triangle(n, fill):
    j, k = np.indices((n + 1, n + 1))
    return np.where(j + k <= n, fill(j, k), 0).astype(complex)


def test_I_of_zero_and_constants():
    n, h = 20, 0.05
    assert np.all(apply_I(np.zeros((n + 1, n + 1)), h) == 0)
    out = apply_I(triangle(n, lambda j, k: np.ones_like(j)), h)
    assert np.allclose(out[0], -h * np.arange(n + 1))
    # F = xi is linear so the trapezoid is exact: -xi^2/2
    out = apply_I(triangle(n, lambda j, k: h * k), h)
    assert np.allclose(out[0], -0.5 * (h * np.arange(n + 1)) ** 2)


def test_convolution_examples():
    n, h = 200, 0.01
    xi = h * np.arange(n + 1)
    one = np.ones(n + 1)
    assert np.allclose(convolve(one, one, h), xi)
    err = np.max(np.abs(convolve(one, xi, h) - xi**2 / 2))
    assert err < h**2
    f, g = np.exp(-xi), np.cos(3 * xi)
    assert np.allclose(convolve(f, g, h), convolve(g, f, h))


def test_convolution_grid_mismatch():
    with pytest.raises(ValueError):
        convolve(np.ones(5), np.ones(6), 0.1)


def test_airy_standard_form_values():
    spec = builtin("airy")
    roots = wkb_recursion(spec, 4)
    c = standard_form(spec, roots, 1)
    # at x = 1 with sqrt(D0) = 2
    assert np.isclose(c.b0.evaluate_with_root(1.0, 2.0), 5 / 64)
    assert np.isclose(c.b1.evaluate_with_root(1.0, 2.0), -0.5)  # -eps/2 with eps = +1
    assert c.k1.is_zero()
    assert not c.has_beta0 and not c.has_kappa1


def test_b0_is_second_order_root():
    for name in ("airy", "weber_deformed"):
        spec = builtin(name)
        roots = wkb_recursion(spec, 3)
        for alpha in (1, -1):
            c = standard_form(spec, roots, alpha)
            eps_sqrt = FieldElement(roots.d0.constant(0), roots.d0.constant(alpha), roots.d0)
            assert roots.coeffs(alpha)[2] == -(eps_sqrt * c.b0)


def test_polynomial_h_terms_give_beta():
    spec = from_strings("x/5 + h*x/10 + h^2/3", "-(x^2-4) + h*x/3 + h^2*x/5 + h^3/7")
    c = standard_form(spec, wkb_recursion(spec, 3), 1)
    assert c.B0[0].is_zero() and c.B1[0].is_zero()
    assert c.has_beta0 and c.has_kappa1


def test_constant_q_field_vanishes():
    spec = builtin("constant_q")
    c = standard_form(spec, wkb_recursion(spec, 3), 1)
    frame = LiouvilleFrame(spec, 0.0)
    bf = solve_borel(c, frame, 0.0, 1, 0.0, 1.0, 20)
    assert np.all(bf.tau == 0)


def test_airy_seed():
    spec = builtin("airy")
    roots = wkb_recursion(spec, 4)
    frame = LiouvilleFrame(spec, 1.0)
    bf = tau_march(standard_form(spec, roots, 1), flow_grid(frame, 1.0, 1, 0.0, 0.5, 20))
    assert abs(bf.tau[0, 0] + 5 / 64) < 1e-15
    assert abs(bf.sigma_base[0] - roots.plus[2].evaluate_with_root(1.0, 2.0)) < 1e-15


@pytest.fixture(scope="module")
def custom():
    spec = from_strings("x/5 + h*x/10 + h^2/3 + h^3*x/7", "-(x^2-4) + h*x/3 + h^2*x/5 + h^3/7")
    roots = wkb_recursion(spec, 4)
    frame = LiouvilleFrame(spec, 3.0)
    return spec, roots, frame


def test_series_and_march_agree(custom):
    spec, roots, frame = custom
    for alpha in (1, -1):
        c = standard_form(spec, roots, alpha)
        grid = flow_grid(frame, 3.0, alpha, 0.0, 0.8, 40)
        a = tau_recursion(c, grid).tau
        b = tau_march(c, grid).tau
        assert np.max(np.abs(a - b)) < 1e-12
        assert integral_equation_residual(c, tau_march(c, grid)) < 1e-12


def test_march_converges_at_second_order(airy, airy_roots, airy_frame):
    c = standard_form(airy, airy_roots, 1)
    ref = tau_march(c, flow_grid(airy_frame, 1.0, 1, 0.0, 1.0, 320)).tau[0, ::8]
    errs = []
    for n in (40, 80):
        t = tau_march(c, flow_grid(airy_frame, 1.0, 1, 0.0, 1.0, n)).tau[0, :: n // 40]
        errs.append(np.max(np.abs(t - ref)))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_richardson_improves_on_plain(airy, airy_roots, airy_frame):
    c = standard_form(airy, airy_roots, 1)
    ref = tau_march(c, flow_grid(airy_frame, 1.0, 1, 0.0, 1.0, 640)).tau[0, ::16]
    plain = solve_borel(c, airy_frame, 1.0, 1, 0.0, 1.0, 40, richardson=False).tau[0]
    rich = solve_borel(c, airy_frame, 1.0, 1, 0.0, 1.0, 40).tau[0]
    assert np.max(np.abs(rich - ref)) < 0.1 * np.max(np.abs(plain - ref))


def test_z_space_check_lateral(airy, airy_roots, airy_frame):
    c = standard_form(airy, airy_roots, 1)
    n = 60
    tx = tau_march(c, flow_grid(airy_frame, 1.5, 1, 0.4, 0.8, n)).tau
    tz, _, _ = successive_approx_check(c, airy_frame, 1.5, 1, 0.4, 0.8, n)
    j, k = np.indices(tx.shape)
    assert np.max(np.abs((tx - tz)[j + k <= n])) < 1e-10


def test_divergence_reported():
    spec = builtin("airy")
    roots = wkb_recursion(spec, 4)
    frame = LiouvilleFrame(spec, 1.0)
    c = standard_form(spec, roots, 1)
    grid = flow_grid(frame, 1.0, 1, 0.0, 200.0, 40)
    with pytest.raises(BorelDivergenceError):
        tau_recursion(c, grid)


def test_bound_fit_on_exponential_terms():
    # phi_n = (B xi)^n/n! has M_n = B^n exactly
    n, h, B = 50, 0.02, 1.7
    xi = h * np.arange(n + 1)
    terms = [np.tile((B * xi) ** m / math.factorial(m), (3, 1)) for m in range(6)]
    A, Bfit, M = bound_fit(terms, h)
    assert np.isclose(A, 1) and np.isclose(Bfit, B)


def test_formal_borel_taylor_matches_grid_near_origin(airy, airy_roots, airy_frame):
    c = standard_form(airy, airy_roots, -1)
    grid = flow_grid(airy_frame, 1.5, -1, 0.3, 0.05, 50)
    tau = tau_march(c, grid).tau[0]
    r = math.sqrt(6.0)
    sig = formal_borel(airy_roots, -1)
    xi = grid.xi
    # tau = sigma/(eps sqrt(D0)) with eps = -1
    ref = sum(complex(s.evaluate_with_root(1.5, r)) * xi**k for k, s in enumerate(sig)) / -r
    assert np.max(np.abs(tau - ref) / np.abs(ref)) < 1e-4
