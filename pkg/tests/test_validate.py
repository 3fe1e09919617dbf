import math

import numpy as np
import pytest
from scipy.special import airy as airy_fn

from exactwkb.problems import builtin, from_strings
from exactwkb.validate import direct_solve, monodromy_eigen, ode_residual_check, transfer_matrix


def test_constant_q_closed_form():
    spec, hb = builtin("constant_q"), 0.5
    xs = np.linspace(0, 1, 6)
    res = direct_solve(spec, [0.0, 1.0], hb, (1.0, 1.0), x_out=xs)
    assert np.allclose(res.psi, np.exp(xs / hb), rtol=1e-9)
    assert np.allclose(res.dpsi, np.exp(xs / hb), rtol=1e-9)


def test_airy_unit_hbar_against_special_function():
    ai, aip, _, _ = airy_fn(0.0)
    xs = np.linspace(0, 2, 5)
    res = direct_solve(builtin("airy"), [0.0, 2.0], 1.0, (ai, aip), x_out=xs)
    assert np.allclose(res.psi, airy_fn(xs)[0], rtol=1e-8)


def test_complex_polyline():
    # psi = e^{x/hbar} along 0 -> 1 -> 1 + i
    spec, hb = builtin("constant_q"), 0.5
    res = direct_solve(spec, [0.0, 1.0, 1.0 + 1.0j], hb, (1.0, 1.0), x_out=[1.0 + 0.5j, 1.0 + 1.0j])
    assert np.allclose(res.psi, np.exp(np.array([1 + 0.5j, 1 + 1j]) / hb), rtol=1e-9)


def test_linearity():
    spec, hb = builtin("weber"), 0.3
    a = direct_solve(spec, [3.0, 4.0], hb, (1.0, 0.0))
    b = direct_solve(spec, [3.0, 4.0], hb, (0.0, 1.0))
    ab = direct_solve(spec, [3.0, 4.0], hb, (2.0, -3.0))
    assert np.allclose(ab.psi, 2 * a.psi - 3 * b.psi, rtol=1e-8)


def test_error_estimate_reported():
    res = direct_solve(builtin("airy"), [1.0, 2.0], 0.2, (1.0, -1.0), error_estimate=True)
    assert res.error_estimate is not None and res.error_estimate < 1e-8


def test_output_points_must_lie_on_path():
    with pytest.raises(ValueError):
        direct_solve(builtin("airy"), [1.0, 2.0], 0.2, (1.0, 0.0), x_out=[1.5j])


def test_zero_hbar_rejected():
    with pytest.raises(ValueError):
        direct_solve(builtin("airy"), [1.0, 2.0], 0.0, (1.0, 0.0))


def test_transfer_matrix_trivial_path_is_identity():
    tm = transfer_matrix(builtin("airy"), [1.0, 1.0], 0.1)
    assert np.array_equal(tm.M, np.eye(2))


def test_transfer_matrix_constant_q_eigenvalues():
    hb = 0.5
    tm = transfer_matrix(builtin("constant_q"), [0.0, 1.0], hb)
    ev = tm.eigenvalues()
    assert np.allclose(ev, [math.exp(2), math.exp(-2)], rtol=1e-9)


def test_abel_determinant_with_first_order_term():
    spec = from_strings("x + h", "1 - x^2")
    tm = transfer_matrix(spec, [0.0, 0.7, 0.7 + 0.4j], 1.0)
    assert tm.det_feasible
    assert tm.det_check <= 1e-8


def test_monodromy_large_times_small_is_det():
    # Mathieu has p = 0, so the Floquet multipliers multiply to 1
    spec = builtin("mathieu")
    m = monodromy_eigen(spec, math.pi, 2 * math.pi, 1.0j)
    assert abs(m["large"] * m["small"] - 1) < 1e-8


def test_ode_residual_of_closed_form():
    spec, hb = builtin("constant_q"), 0.2
    r = ode_residual_check(spec, lambda x: np.exp(-x / hb), [0.1, 0.5], hb)
    assert r < 1e-6
