import math

import pytest
from scipy.integrate import quad

from exactwkb.geometry import GeometryError, LiouvilleFrame, classify_critical_points, flow_map, trace_both, trace_trajectory
from exactwkb.problems import builtin, catalog, from_strings


def kinds(spec):
    return sorted((c.kind, c.order) for c in classify_critical_points(spec))


@pytest.mark.parametrize("entry", [e for e in catalog()], ids=lambda e: e.name)
def test_classification_matches_catalog(entry):
    got = kinds(entry.build(**entry.defaults))
    want = sorted((k, m) for _, k, m in entry.expected_critical)
    assert got == want


def test_simple_pole_classified():
    assert kinds(from_strings("0", "-1/x")) == [("infinite_critical", 3), ("simple_pole", 1)]


def test_liouville_coordinate_airy():
    frame = LiouvilleFrame(builtin("airy"), 1.0)
    # Phi(x) = int_1^x 2 sqrt(t) dt
    for x in (2.0, 1.5 + 0.5j):
        assert abs(frame.liouville_eval(x) - (4 / 3) * (x**1.5 - 1)) < 1e-11


def test_basepoint_at_turning_point_rejected():
    with pytest.raises(GeometryError):
        LiouvilleFrame(builtin("airy"), 0.0)


def test_flow_map_constant_q_is_affine():
    frame = LiouvilleFrame(builtin("constant_q"), 0.0)
    assert abs(flow_map(frame, 0.0, 1.5) - 0.75) < 1e-12
    assert abs(flow_map(frame, 0.0, 1j) - 0.5j) < 1e-12


def test_flow_map_round_trip_weber():
    frame = LiouvilleFrame(builtin("weber"), 3.0)
    for zeta in (2.0, 1.0 + 1.0j, -0.5j):
        x1 = flow_map(frame, 3.0, zeta)
        assert abs(frame.liouville_eval(x1) - zeta) < 1e-9
        assert abs(flow_map(frame, x1, -zeta) - 3.0) < 1e-9


def test_airy_minus_ray_reaches_turning_point():
    frame = LiouvilleFrame(builtin("airy"), 1.0)
    half = trace_trajectory(frame, 1.0, 0.0, -1)
    assert half.status == "hit_turning_point"
    assert abs(half.tau_end + 4 / 3) < 1e-8


def test_mathieu_trajectory_is_closed():
    spec = builtin("mathieu")
    frame = LiouvilleFrame(spec, math.pi, 1, math.pi / 2)
    tr = trace_both(frame, math.pi, math.pi / 2)
    assert tr.status_plus == "complete_closed"
    # period = |int_0^{2 pi} sqrt(D0) dx| with D0 = 8 (2 - cos x)
    ref = quad(lambda x: math.sqrt(8 * (2 - math.cos(x))), 0, 2 * math.pi, epsabs=0, epsrel=1e-13)[0]
    assert abs(tr.period - ref) < 1e-7 * ref


def test_trajectory_rows_are_monotone_in_tau():
    frame = LiouvilleFrame(builtin("airy"), 1.0)
    rows = list(trace_trajectory(frame, 1.0, 0.0, -1).rows())
    taus = [r[0] for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(taus, taus[1:])) or all(b <= a + 1e-12 for a, b in zip(taus, taus[1:]))


def test_invalid_sign():
    frame = LiouvilleFrame(builtin("airy"), 1.0)
    with pytest.raises(ValueError):
        trace_trajectory(frame, 1.0, 0.0, 0)
