import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaykit.channel import (
    ChannelParams,
    dbm_to_mw,
    derive_curve,
    mw_to_dbm,
    nominal_rate,
    rate,
    rate_derivative,
    rate_gradient,
)

from _oracles import erf_rate, plain_bisect


@pytest.fixture(scope="module")
def curve():
    return derive_curve(ChannelParams())


def test_dbm_mw_roundtrip():
    assert dbm_to_mw(0.0) == pytest.approx(1.0)
    assert dbm_to_mw(30.0) == pytest.approx(1000.0)
    assert dbm_to_mw(-70.0) == pytest.approx(1e-7)
    for dbm in (-93.2, -10.0, 0.0, 12.7, 21.0):
        assert mw_to_dbm(dbm_to_mw(dbm)) == pytest.approx(dbm, abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(gain_constant=0.0)
    with pytest.raises(ValueError):
        ChannelParams(path_loss_exponent=-1.0)
    with pytest.raises(ValueError):
        ChannelParams(rate_cutoff=0.0)
    with pytest.raises(ValueError):
        ChannelParams(rate_cutoff=1.0)


def test_with_power_replaces_only_power():
    p = ChannelParams()
    q = p.with_power(21.0)
    assert q.transmit_power_dbm == 21.0
    assert q.noise_floor_dbm == p.noise_floor_dbm
    assert q.gain_constant == p.gain_constant


def test_nominal_rate_matches_math_erf_reference():
    p = ChannelParams()
    for d in (0.5, 1.0, 5.0, 15.0, 28.0, 50.0, 120.0):
        ref = erf_rate(d, p.transmit_power_mw, p.noise_floor_mw, p.gain_constant, p.path_loss_exponent)
        assert nominal_rate(d, p) == pytest.approx(ref, abs=1e-14)


def test_nominal_rate_boundary_and_vectorized():
    p = ChannelParams()
    assert nominal_rate(0.0, p) == 1.0
    d = np.array([0.0, 8.0, 15.0, 40.0])
    vals = nominal_rate(d, p)
    assert vals.shape == (4,)
    assert vals[0] == 1.0
    # erf saturates to 1.0 in floats below a few meters; past that the
    # decay is strict
    assert np.all(np.diff(vals) < 0)


def test_curve_against_independent_bisection_and_finite_difference():
    """Re-derive the transition and cutoff points without scipy."""
    p = ChannelParams()
    c = derive_curve(p)

    def gap(d):
        return (
            erf_rate(d, p.transmit_power_mw, p.noise_floor_mw, p.gain_constant, p.path_loss_exponent)
            - p.rate_cutoff
        )

    d_t_ref = plain_bisect(gap, 1e-3, 1e4, tol=1e-10)
    assert c.transition_distance_m == pytest.approx(d_t_ref, abs=1e-6)

    eps = 1e-6
    slope_ref = (gap(d_t_ref + eps) - gap(d_t_ref - eps)) / (2 * eps)
    assert c.slope_at_transition == pytest.approx(slope_ref, rel=1e-4)

    d_c_ref = d_t_ref - p.rate_cutoff / slope_ref
    assert c.cutoff_distance_m == pytest.approx(d_c_ref, rel=1e-6)


def test_curve_known_values_at_defaults(curve):
    assert curve.transition_distance_m == pytest.approx(15.424175, abs=1e-4)
    assert curve.cutoff_distance_m == pytest.approx(28.088413, abs=1e-4)
    assert curve.slope_at_transition == pytest.approx(-0.01974063, abs=1e-7)


def test_cutoff_distance_scales_with_power():
    base = derive_curve(ChannelParams())
    boosted = derive_curve(ChannelParams().with_power(21.0))
    n = 2.52
    factor_ref = 10 ** (21.0 / (10.0 * n))
    assert boosted.cutoff_distance_m / base.cutoff_distance_m == pytest.approx(
        factor_ref, rel=1e-6
    )
    assert 170.0 <= boosted.cutoff_distance_m <= 230.0


def test_rate_piecewise_structure(curve):
    d_t = curve.transition_distance_m
    d_c = curve.cutoff_distance_m
    p = curve.params
    # nominal branch below the transition
    assert rate(10.0, curve) == pytest.approx(nominal_rate(10.0, p), abs=1e-12)
    assert rate(d_t, curve) == pytest.approx(p.rate_cutoff, abs=1e-8)
    # linear tail between transition and cutoff
    mid = 0.5 * (d_t + d_c)
    expected = p.rate_cutoff + curve.slope_at_transition * (mid - d_t)
    assert rate(mid, curve) == pytest.approx(expected, abs=1e-12)
    assert rate(d_c, curve) == pytest.approx(0.0, abs=1e-9)
    assert rate(d_c + 1e-6, curve) == 0.0
    assert rate(1e6, curve) == 0.0


def test_rate_smooth_at_transition_continuous_at_cutoff(curve):
    eps = 1e-7
    d_t = curve.transition_distance_m
    left = (rate(d_t, curve) - rate(d_t - eps, curve)) / eps
    right = (rate(d_t + eps, curve) - rate(d_t, curve)) / eps
    assert rate(d_t - eps, curve) == pytest.approx(rate(d_t + eps, curve), abs=1e-6)
    assert left == pytest.approx(right, abs=1e-3)
    # the cutoff knot is only C0: the tangent meets zero and stays there
    d_c = curve.cutoff_distance_m
    assert rate(d_c - eps, curve) == pytest.approx(0.0, abs=1e-6)
    assert rate(d_c + eps, curve) == 0.0


def test_rate_derivative_matches_finite_difference(curve):
    eps = 1e-6
    for d in (1.0, 10.0, 15.0, 20.0, 27.0):
        fd = (rate(d + eps, curve) - rate(d - eps, curve)) / (2 * eps)
        assert rate_derivative(d, curve) == pytest.approx(fd, abs=1e-5)
    assert rate_derivative(curve.cutoff_distance_m + 1.0, curve) == 0.0


def test_rate_gradient_geometry(curve):
    x_i = np.array([3.0, 4.0])
    x_j = np.array([0.0, 0.0])
    g = rate_gradient(x_i, x_j, curve)
    d = 5.0
    expected = rate_derivative(d, curve) * (x_i - x_j) / d
    assert np.allclose(g, expected, atol=1e-12)
    # moving closer raises the rate, so the gradient points at the peer
    assert g @ (x_j - x_i) > 0
    # zero beyond the cutoff and at coincident points
    far = np.array([curve.cutoff_distance_m + 5.0, 0.0])
    assert np.allclose(rate_gradient(far, x_j, curve), 0.0)
    assert np.allclose(rate_gradient(x_j, x_j, curve), 0.0)


def test_derive_curve_rejects_unbracketable_cutoff():
    # a vanishing antenna gain keeps the rate below the cutoff everywhere
    with pytest.raises(ValueError):
        derive_curve(ChannelParams(gain_constant=1e-30))


@settings(max_examples=60, deadline=None)
@given(
    d=st.floats(min_value=0.0, max_value=1e4, allow_nan=False),
    power=st.floats(min_value=-10.0, max_value=30.0),
)
def test_rate_bounded_and_monotone(d, power):
    curve = derive_curve(ChannelParams().with_power(power))
    r = rate(d, curve)
    assert 0.0 <= r <= 1.0
    assert rate(d + 1.0, curve) <= r + 1e-12
