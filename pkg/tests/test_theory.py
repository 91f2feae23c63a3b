import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgelab import theory as T
from bridgelab.dist import ExpTailMagnitude, PointMassSet, PowerZeroMagnitude, TwoPointMagnitude, UniformMagnitude
from bridgelab.errors import Inapplicable, InvalidArgument
from bridgelab.se import solve
from oracles import exp_tail_moment, ridge_amse_exact, two_point_cq, uniform_cq


def test_ols():
    assert T.ols_amse(2.0, 0.1) == pytest.approx(0.02)
    assert T.ols_amse(1e6, 1.0) == pytest.approx(1.000001)
    assert T.ols_amse(1.0001, 0.01) == pytest.approx(1.0001, rel=1e-9)
    with pytest.raises(Inapplicable):
        T.ols_amse(1.0, 0.1)


def test_ridge_at_zero_is_ols(unit_mass):
    assert T.ridge_chi(0.0, 2.0) == 0.0
    assert T.ridge_amse_closed(0.0, 2.0, 0.1, unit_mass) == pytest.approx(0.02)


def test_ridge_example_against_calibration_oracle(unit_mass):
    # lam = 0.5, delta = 2: the square root is sqrt(17), chi ~ 0.6404
    assert T.ridge_chi(0.5, 2.0) == pytest.approx((1 + math.sqrt(17)) / 8, rel=1e-14)
    assert T.ridge_amse_closed(0.5, 2.0, 0.1, unit_mass) == pytest.approx(ridge_amse_exact(0.5, 2.0, 0.1), rel=1e-12)


@given(lam=st.floats(1e-4, 50.0), delta=st.floats(0.3, 10.0), sw=st.floats(0.01, 2.0))
def test_ridge_matches_calibration_oracle(lam, delta, sw, unit_mass):
    try:
        val = T.ridge_amse_closed(lam, delta, sw, unit_mass)
    except Inapplicable:
        return
    assert val == pytest.approx(ridge_amse_exact(lam, delta, sw), rel=1e-9)


def test_ridge_rejects_negative_lambda(unit_mass):
    with pytest.raises(InvalidArgument):
        T.ridge_amse_closed(-1.0, 2.0, 0.1, unit_mass)


def test_ridge_grid_minimum_matches_state_evolution(unit_mass):
    r = T.ridge_amse_min(2.0, 0.1, unit_mass)
    assert r.amse == pytest.approx(solve(2.0, 2.0, 0.1, unit_mass).amse, abs=1e-9)
    assert r.grid_lam.size == 200


def test_cq_closed_forms():
    for q in (1.2, 1.5, 2.0):
        assert T.cq(q, TwoPointMagnitude(2.0, 2.0, 0.4)) == pytest.approx((q - 1) ** 2 / 4.0)
        assert T.cq(q, UniformMagnitude(2.0)) == pytest.approx(uniform_cq(q, 2.0), rel=1e-12)
    assert T.cq(1.5, ExpTailMagnitude(1.0, 1.0)) == pytest.approx(math.gamma(1.5) ** 2, rel=1e-10)


@given(q=st.floats(1.05, 2.0), tau=st.floats(0.3, 4.0), q0=st.floats(0.5, 2.0))
def test_cq_exp_tail_identity(q, tau, q0):
    d = ExpTailMagnitude(tau, q0)
    ref = (q - 1) ** 2 * exp_tail_moment(q - 2, tau, q0) ** 2 / exp_tail_moment(2 * q - 2, tau, q0)
    assert T.cq(q, d) == pytest.approx(ref, rel=1e-8)


def test_cq_toward_lasso():
    # bounded away from zero: the (q-1)^2 factor wins
    for d in (TwoPointMagnitude(1.0, 3.0, 0.5), PointMassSet([(0.5, 0.3), (2.0, 0.7)])):
        assert T.cq(1.0 + 1e-6, d) < 1e-10
    # positive density at zero: E|B|^(q-2) ~ 1/(q-1) cancels it
    assert T.cq(1.0 + 1e-6, UniformMagnitude(1.0)) == pytest.approx(1.0, rel=1e-5)


def test_cq_divergent_moment():
    with pytest.raises(Inapplicable):
        T.cq(1.3, PowerZeroMagnitude(0.5))
    with pytest.raises(InvalidArgument):
        T.cq(1.0, UniformMagnitude(1.0))


def test_small_noise_reports(unit_mass):
    r = T.small_noise_expansion(2.0, 2.0, 0.1, unit_mass)
    assert (r.first_term, r.second_term, r.validity) == (pytest.approx(0.02), pytest.approx(-8e-4), "valid")
    r = T.small_noise_expansion(1.5, 2.0, 0.01, unit_mass)
    assert r.second_term == pytest.approx(-2e-8)
    r = T.small_noise_expansion(1.5, 2.0, 0.01, PowerZeroMagnitude(0.3))
    assert r.validity == "inapplicable"
    r = T.small_noise_expansion(1.0, 2.0, 0.05, unit_mass)
    assert r.validity == "valid" and r.second_term == 0.0 and "exponentially" in r.notes
    r = T.small_noise_expansion(1.0, 2.0, 0.1, PowerZeroMagnitude(0.5))
    assert r.validity == "lasso-bracket-only"
    assert r.second_term == pytest.approx(-(0.1**3))
    with pytest.raises(Inapplicable):
        T.small_noise_expansion(1.5, 1.0, 0.1, unit_mass)


def test_applicability_margin():
    d = ExpTailMagnitude(1.0, 1.0)
    assert T.small_noise_expansion(1.0005, 2.0, 0.1, d).validity == "inapplicable"
    assert T.small_noise_expansion(1.002, 2.0, 0.1, d).validity == "valid"
    d = PowerZeroMagnitude(0.6)
    assert T.small_noise_expansion(1.5, 2.0, 0.1, d).validity == "valid"
    assert T.small_noise_expansion(1.35, 2.0, 0.1, d).validity == "inapplicable"


def test_large_delta_reports(unit_mass):
    r = T.large_delta_expansion(2.0, 100.0, 0.5, unit_mass)
    assert r.first_term == pytest.approx(0.0025)
    assert r.second_term == pytest.approx(1.875e-5)
    r = T.large_delta_expansion(1.0, 100.0, 0.5, unit_mass)
    assert r.second_term == pytest.approx(0.25 / 1e4) and r.validity == "valid"
    r = T.large_delta_expansion(1.0, 50.0, 0.5, PowerZeroMagnitude(0.5))
    assert r.validity == "lasso-bracket-only" and "-1.5" in r.notes
    r = T.large_delta_expansion(1.0, 50.0, 0.5, PowerZeroMagnitude(1.5))
    assert r.validity == "inapplicable"


@given(q=st.floats(1.01, 2.0), delta=st.floats(1.1, 50.0), sw=st.floats(1e-3, 1.0))
def test_small_noise_second_term_nonpositive(q, delta, sw):
    r = T.small_noise_expansion(q, delta, sw, UniformMagnitude(1.0))
    assert r.validity == "valid" and r.second_term <= 0.0
    assert r.first_term == pytest.approx(sw**2 / (1 - 1 / delta))


def test_q_star_reproductions():
    assert T.q_star(UniformMagnitude(1.0))[0] == 2.0
    assert abs(T.q_star(ExpTailMagnitude(2.0, 1.5))[0] - 1.5) <= 0.01
    q, curve = T.q_star(TwoPointMagnitude(1.0, 100.0, 0.5))
    qs = np.array([c[0] for c in curve])
    vals = np.array([two_point_cq(x, 1.0, 100.0, 0.5) for x in qs])
    assert abs(q - qs[np.argmax(vals)]) <= qs[1] - qs[0]
    assert len(curve) == 200 and curve[0][0] == pytest.approx(1.001)


def test_q_star_moves_toward_one_with_spread():
    qs = [T.q_star(TwoPointMagnitude(1.0, k, 0.5))[0] for k in (1.0, 10.0, 100.0, 1e4)]
    assert qs[0] == 2.0
    assert all(a > b for a, b in zip(qs, qs[1:]))


@given(scale=st.floats(0.1, 20.0))
def test_q_star_scale_equivariant(scale):
    a = T.q_star(TwoPointMagnitude(1.0, 8.0, 0.4))[0]
    b = T.q_star(TwoPointMagnitude(scale, 8.0 * scale, 0.4))[0]
    assert a == pytest.approx(b, abs=1e-6)


def test_q_star_excludes_undefined_points():
    q, curve = T.q_star(PowerZeroMagnitude(0.5))
    assert any(c is None for _, c in curve)
    assert all(x > 1.5 for x, c in curve if c is not None)
    assert q > 1.5


def test_q_star_only_ridge_defined():
    # C_q blows up as q approaches the moment boundary 2 - ell from above,
    # so the refined maximiser sits just above that boundary
    q, curve = T.q_star(PowerZeroMagnitude(1e-4))
    assert 1.9999 < q <= 2.0
    assert [x for x, c in curve if c is not None] == [2.0]
