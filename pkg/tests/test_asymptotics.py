import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ifront.asymptotics import (
    CalibrationFailed,
    SlowFrontApprox,
    calibrate_alpha,
    calibration_integral,
    fkpp_lambda,
    fkpp_v0,
    front_deviation,
    hat_v0,
    large_m_speed,
    phi0_flatness,
    phi_map,
    scalar_minimal_speed_bounds,
    sharp_profile,
    solve_u0,
)
from ifront.core import ModelParams
from tests.conftest import profile_of

P02 = ModelParams(2, 1, 0.2)


@pytest.fixture(scope="module")
def approx02():
    return calibrate_alpha(P02)


def test_hat_v0_example():
    lam = fkpp_lambda(P02)
    assert lam == pytest.approx(0.904988, abs=1e-6)
    assert lam * (lam + 0.2) == pytest.approx(1.0, rel=1e-14)
    assert hat_v0(0.0, P02) == pytest.approx(0.818999, abs=1e-5)


@given(c=st.floats(0.01, 1.9), r=st.floats(0.5, 5))
def test_hat_v0_c1_at_origin(c, r):
    p = ModelParams(2, r, c)
    lam = fkpp_lambda(p)
    left = 1 - c / (c + lam)
    right = lam / (c + lam)
    assert left == pytest.approx(right, abs=1e-14)
    assert float(hat_v0(0.0, p)) == pytest.approx(right, abs=1e-15)
    # one-sided derivatives -c lam / (c + lam)
    h = 1e-7
    dl = (hat_v0(0.0, p) - hat_v0(-h, p)) / h
    dr = (hat_v0(h, p) - hat_v0(0.0, p)) / h
    target = -c * lam / (c + lam)
    assert dl == pytest.approx(target, abs=1e-6)
    assert dr == pytest.approx(target, abs=1e-6)


@pytest.mark.parametrize("c", [0.05, 0.1, 0.2, 0.4])
def test_fkpp_v0_matching_and_leading_order(c):
    p = ModelParams(2, 1, c)
    v0 = fkpp_v0(p)
    assert v0.slope_at_0 == pytest.approx(-c * v0.v_at_0, abs=1e-12)
    lam = fkpp_lambda(p)
    assert abs(v0.v_at_0 - (1 - c / (c + lam))) <= 2 * c * c
    assert np.all(np.diff(v0.v) < 0)
    assert v0(0.0) == pytest.approx(v0.v_at_0, abs=1e-10)


def test_fkpp_v0_close_to_hat_uniformly():
    ks = []
    for c in (0.05, 0.1, 0.2, 0.4):
        p = ModelParams(2, 1, c)
        v0 = fkpp_v0(p)
        ks.append(np.max(np.abs(v0.v - hat_v0(v0.y, p))) / c**2)
    # sup |v0 - vhat0| <= K c^2 with a stable K
    assert max(ks) < 0.4
    assert max(ks) / min(ks) < 1.3


def test_fkpp_v0_rejects_strong_damping():
    with pytest.raises(ValueError):
        fkpp_v0(ModelParams(2, 1, 2.0))
    with pytest.raises(ValueError):
        calibrate_alpha(ModelParams(2, 1, 2.5))


def test_calibration_example(approx02):
    a = approx02
    assert a.b == pytest.approx(2 * hat_v0(0.0, P02) - 1, rel=1e-14)
    assert a.b == pytest.approx(0.638, abs=1e-3)
    assert a.xi_star < 0
    assert a.kappa == pytest.approx(
        0.2 / a.b * math.log((1 + a.b) * a.alpha_cal / a.b), rel=1e-14)
    shift = 0.2 / a.b * math.log(a.alpha_cal)
    resid = calibration_integral(shift, P02, a.b) - 0.2
    assert abs(resid) / 0.2 <= 1e-8


def test_calibration_integral_decreasing(approx02):
    shifts = np.linspace(-1.0, 1.0, 9)
    vals = [calibration_integral(s, P02, approx02.b) for s in shifts]
    assert np.all(np.diff(vals) < 0)


def test_xi_star_is_zero_of_map(approx02):
    assert phi_map(approx02.xi_star, approx02) == pytest.approx(0.0, abs=1e-12)
    # closed form through u0(0): exp(b xi*/c) = (1+b) u0 / (b + u0)
    b, c = approx02.b, 0.2
    u = solve_u0(0.0, approx02)
    xi = (c / b) * math.log((1 + b) * u / (b + u))
    assert xi == pytest.approx(approx02.xi_star, rel=1e-10)


def test_calibration_fails_for_large_speed():
    with pytest.raises((CalibrationFailed, ValueError)):
        calibrate_alpha(ModelParams(2, 1, 1.5))


def test_invalid_approx_rejected():
    with pytest.raises(ValueError):
        SlowFrontApprox(-0.1, 1.0, 0.0, -1.0, P02)
    with pytest.raises(ValueError):
        SlowFrontApprox(0.5, 1.0, 0.0, 0.5, P02)


def test_u0_left_tail(approx02):
    b, c, a = approx02.b, 0.2, approx02.alpha_cal
    # right-hand side of the implicit relation equal to 1e-12
    y = (math.log(1e-12) - (1 + b) * math.log(a) + math.log(b)) * c / (b * (1 + b))
    assert solve_u0(y, approx02) == pytest.approx(a * math.exp(b * y / c),
                                                   rel=1e-3)
    assert solve_u0(50.0, approx02) > 1 - 1e-12


def test_u0_shift_property(approx02):
    b, c = approx02.b, 0.2
    ys = np.linspace(-5, 5, 41)
    a = approx02.alpha_cal
    u1 = solve_u0(ys, approx02, alpha=a)
    u2 = solve_u0(ys - (c / b) * math.log(2), approx02, alpha=2 * a)
    np.testing.assert_allclose(u1, u2, rtol=1e-10)


def test_u0_monotone(approx02):
    u = solve_u0(np.linspace(-10, 3, 400), approx02)
    assert np.all(np.diff(u) > 0) and np.all((u > 0) & (u < 1))


def test_sharp_profile_limits(approx02):
    b, c = approx02.b, 0.2
    U0, V0 = sharp_profile(approx02, np.array([-200.0, -1e-12]))
    assert U0[0] < 1e-100 and U0[1] == pytest.approx(1.0, abs=1e-9)
    xi_half = (c / b) * math.log(0.5)
    U0, _ = sharp_profile(approx02, [xi_half])
    assert U0[0] == pytest.approx(0.5 * b / (0.5 + b), rel=1e-12)
    assert U0[0] == pytest.approx(0.2804, abs=1e-4)
    with pytest.raises(ValueError):
        sharp_profile(approx02, [0.0])


def test_sharp_profile_v0_matches_branches(approx02):
    xi = np.linspace(-8, -1e-3, 500)
    _, V0 = sharp_profile(approx02, xi)
    assert np.all(np.diff(V0) < 0)
    _, Vs = sharp_profile(approx02, [approx02.xi_star])
    assert Vs[0] == pytest.approx(hat_v0(0.0, P02), rel=1e-10)


def test_u0_independent_of_alpha(approx02):
    other = SlowFrontApprox.from_alpha(P02, 3 * approx02.alpha_cal, approx02.b)
    xi = np.linspace(-6, -1e-3, 100)
    np.testing.assert_array_equal(sharp_profile(approx02, xi)[0],
                                  sharp_profile(other, xi)[0])
    assert other.xi_star != approx02.xi_star


def test_phi_derivative(approx02):
    xi = np.linspace(-6, -0.05, 50)
    h = 1e-6
    fd = (phi_map(xi + h, approx02) - phi_map(xi - h, approx02)) / (2 * h)
    U0, _ = sharp_profile(approx02, xi)
    np.testing.assert_allclose(fd, 1 / (1 - U0), rtol=1e-4)
    assert np.all(np.diff(phi_map(xi, approx02)) > 0)


def test_flatness(approx02):
    fl = phi0_flatness(approx02)
    assert fl.m == pytest.approx((1 + approx02.b) / 0.04, rel=1e-14)
    assert fl.m == pytest.approx(40.95, abs=0.01)
    b = approx02.b
    assert fl.beta**b == pytest.approx(
        b / ((b + 1) * approx02.alpha_cal**(1 + b)), rel=1e-12)
    small = (fl.v > 1e-200) & (fl.v < 1e-3) & (fl.phi > 0)
    slope = np.polyfit(np.log(fl.v[small]), np.log(fl.phi[small]), 1)[0]
    assert slope == pytest.approx(fl.m, rel=0.05)


def test_flatness_grows_as_speed_drops():
    ms = [phi0_flatness(calibrate_alpha(ModelParams(2, 1, c))).m
          for c in (0.4, 0.2, 0.1)]
    assert ms[0] < ms[1] < ms[2]


def test_scalar_speed_bounds():
    assert scalar_minimal_speed_bounds(1, 1, 1) == pytest.approx((1 / 3, 1))
    with pytest.raises(ValueError):
        scalar_minimal_speed_bounds(1, 1, 0.5)
    assert large_m_speed(1, 1, 10) == pytest.approx(math.sqrt(2) / 10)


@given(D=st.floats(0.1, 10), r=st.floats(0.1, 10), m=st.floats(1, 1e4))
def test_scalar_bounds_ordered(D, r, m):
    lo, hi = scalar_minimal_speed_bounds(D, r, m)
    assert 0 < lo < hi


def test_self_consistency_of_flat_diffusion(approx02):
    m = (1 + approx02.b) / 0.2**2
    assert scalar_minimal_speed_bounds(1.0, 1.0, m).upper < 0.2


def _deviation(c):
    pr = profile_of(2.0, 1.0, c)
    return front_deviation(calibrate_alpha(ModelParams(2, 1, c)),
                           pr.xi, pr.U, pr.V)


def test_sharp_front_approaches_true_front():
    dv02, du02 = _deviation(0.2)
    dv04, du04 = _deviation(0.4)
    assert dv02 < dv04 and du02 < du04
    # golden value of the comparison at c = 0.2
    assert dv02 == pytest.approx(0.0484, abs=5e-4)
    assert dv02 <= 0.05
