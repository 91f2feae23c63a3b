import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgelab.errors import InvalidArgument
from bridgelab.prox import fixed_point_residual, prox, prox_value, property_battery
from oracles import prox_bisect

interior_q = st.floats(1.02, 1.98)
u_vals = st.floats(-20.0, 20.0).filter(lambda x: abs(x) > 1e-3)
chis = st.floats(1e-4, 20.0)


def test_soft_threshold():
    np.testing.assert_allclose(prox_value(np.array([-3.0, -0.5, 0.5, 3.0]), 1.0, 1.0), [-2.0, 0.0, 0.0, 2.0])


def test_ridge_shrink():
    assert prox_value(3.0, 1.0, 2.0) == pytest.approx(1.0)


def test_zero_chi_is_identity():
    r = prox(1.7, 0.0, 1.5)
    assert r.value == 1.7 and r.d_du == 1.0
    assert r.d_dchi == pytest.approx(-1.5 * 1.7**0.5)


def test_zero_input():
    r = prox(0.0, 0.3, 1.5)
    assert r.value == 0.0


def test_scalar_in_scalar_out():
    assert isinstance(prox(1.0, 0.2, 1.3).value, float)


@pytest.mark.parametrize("q,chi", [(0.9, 1.0), (2.1, 1.0), (1.5, -0.1)])
def test_rejects_bad_parameters(q, chi):
    with pytest.raises(InvalidArgument):
        prox(1.0, chi, q)


def test_rejects_nan_input():
    with pytest.raises(InvalidArgument):
        prox(np.array([1.0, np.nan]), 0.1, 1.5)


def test_broadcasting():
    u = np.linspace(-3, 3, 7)[:, None]
    chi = np.array([0.1, 1.0])[None, :]
    r = prox(u, chi, 1.5)
    assert r.value.shape == (7, 2)
    assert r.value[3, 0] == 0.0


@given(u=u_vals, chi=chis, q=interior_q)
def test_matches_bisection(u, chi, q):
    assert prox_value(u, chi, q) == pytest.approx(prox_bisect(u, chi, q), rel=1e-11, abs=1e-300)


@given(u=u_vals, chi=chis, q=interior_q)
def test_fixed_point_identity(u, chi, q):
    assert fixed_point_residual(u, chi, q) <= 1e-12 * abs(u)


@given(u=u_vals, chi=chis, q=st.floats(1.0, 2.0))
def test_odd_and_shrinking(u, chi, q):
    v = prox_value(u, chi, q)
    assert prox_value(-u, chi, q) == -v
    assert abs(v) <= abs(u)
    assert v * u >= 0


@given(u=u_vals, chi=chis, q=interior_q, a=st.floats(0.1, 10.0))
def test_scale_invariance(u, chi, q, a):
    lhs = prox_value(a * u, a ** (2.0 - q) * chi, q)
    assert lhs == pytest.approx(a * prox_value(u, chi, q), rel=1e-11, abs=1e-300)


@given(u1=u_vals, u2=u_vals, chi=chis, q=st.floats(1.0, 2.0))
def test_monotone_and_nonexpansive(u1, u2, chi, q):
    v1, v2 = prox_value(u1, chi, q), prox_value(u2, chi, q)
    assert (v1 - v2) * (u1 - u2) >= -1e-15
    assert abs(v1 - v2) <= abs(u1 - u2) * (1 + 1e-12)


@given(u=st.floats(0.1, 10.0), chi=st.floats(1e-3, 10.0), q=st.floats(1.05, 1.95))
def test_derivatives_match_finite_differences(u, chi, q):
    r = prox(u, chi, q)
    h = 1e-6
    fd_u = (prox_value(u + h, chi, q) - prox_value(u - h, chi, q)) / (2 * h)
    hc = h * chi
    fd_c = (prox_value(u, chi + hc, q) - prox_value(u, chi - hc, q)) / (2 * hc)
    assert fd_u == pytest.approx(r.d_du, abs=1e-5 * max(1, abs(r.d_du)))
    assert fd_c == pytest.approx(r.d_dchi, abs=1e-5 * max(1, abs(r.d_dchi)))


@given(u=u_vals, chi=chis, q=st.floats(1.0, 2.0))
def test_derivative_bounds(u, chi, q):
    r = prox(u, chi, q)
    assert 0.0 <= r.d_du <= 1.0
    assert r.d_dchi * u <= 0.0


@given(u=st.floats(0.1, 5.0), chi=st.floats(1e-3, 5.0))
def test_continuity_at_the_ends(u, chi):
    assert prox_value(u, chi, 1.0 + 1e-9) == pytest.approx(prox_value(u, chi, 1.0), abs=1e-6)
    assert prox_value(u, chi, 2.0 - 1e-9) == pytest.approx(prox_value(u, chi, 2.0), abs=1e-6)


def test_minimises_objective():
    rng = np.random.default_rng(0)
    for _ in range(50):
        u, chi, q = rng.normal() * 3, rng.uniform(0.01, 3), rng.uniform(1, 2)
        v = prox_value(u, chi, q)
        obj = lambda z: 0.5 * (u - z) ** 2 + chi * abs(z) ** q
        for z in v + np.linspace(-0.1, 0.1, 21):
            assert obj(v) <= obj(z) + 1e-12


def test_tiny_roots_do_not_break():
    v = prox_value(np.array([1e-8, 1e-3]), 50.0, 1.001)
    assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_battery_passes():
    res = property_battery(count=2000, seed=4)
    assert res["passed"], res
