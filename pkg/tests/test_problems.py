import math

import numpy as np
import pytest

from exactwkb.coeffield import X
from exactwkb.formal import wkb_recursion
from exactwkb.problems import (
    UnknownProblemError,
    builtin,
    catalog,
    catalog_entry,
    check_fixtures,
    from_strings,
    to_schrodinger,
)
from exactwkb.validate import direct_solve


def test_catalog_names_and_json():
    names = [e.name for e in catalog()]
    assert names == ["airy", "weber", "weber_deformed", "mathieu", "constant_q"]
    for e in catalog():
        doc = e.to_json()
        assert doc["name"] == e.name and "fixtures" in doc


def test_fixtures_carry_provenance():
    for key, fx in catalog_entry("airy").fixtures.items():
        assert fx["provenance"] in ("PAPER", "DERIVED")


def test_airy_fixture_check():
    report = check_fixtures(catalog_entry("airy"), wkb_recursion(builtin("airy"), 3))
    assert set(report) == {"s1", "s2", "s3"}
    assert all(r["match"] for r in report.values())


def test_builtin_parameters():
    spec = builtin("weber", a=0)
    assert spec.q[0] == -(X * X)
    with pytest.raises(ValueError):
        builtin("airy", a=1)
    with pytest.raises(UnknownProblemError):
        builtin("nope")


def test_schrodinger_form_of_airy_is_itself():
    s = to_schrodinger(builtin("airy"))
    assert s.Q == [X]


def test_schrodinger_form_removes_first_order_term():
    # p = 2x: Q = x^2 - q0 + h (p0'/2) = x^2 + 1 + h with q = -1
    s = to_schrodinger(from_strings("2*x", "-1"))
    assert s.Q[0] == X * X + 1
    assert s.Q[1] == X ** 0


def test_schrodinger_round_trip_with_first_order_term():
    spec = from_strings("x/3 + h", "-(x^2-4) - 2*h")
    form = to_schrodinger(spec)
    hb, x0, x1 = 0.3, 3.0, 3.6
    # solve the original problem, then map the same data through the transformed one
    orig = direct_solve(spec, [x0, x1], hb, (1.0, -1.0))
    p0 = complex(spec.p_value(x0, hb))
    u = direct_solve(form.spec, [x0, x1], hb, (1.0, -1.0 + p0 / 2))
    psi = form.to_original(u.psi[-1], x1, hb, x0)
    assert abs(psi / orig.psi[-1] - 1) < 1e-6


def test_from_strings_meta():
    spec = from_strings("0", "x^2 - 4 + h")
    assert spec.meta == {"p": "0", "q": "x^2 - 4 + h"}
    assert len(spec.q) == 2
