"""Checks of the compiled Dormand-Prince kernel against independent sources."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate._ivp.rk import RK45

from ifront import _dopri
from ifront.core import ModelParams
from ifront.desing import rhs


def test_tableau_matches_scipy():
    A = np.zeros((7, 7))
    A[1, 0] = _dopri.A21
    A[2, :2] = _dopri.A31, _dopri.A32
    A[3, :3] = _dopri.A41, _dopri.A42, _dopri.A43
    A[4, :4] = _dopri.A51, _dopri.A52, _dopri.A53, _dopri.A54
    A[5, :5] = _dopri.A61, _dopri.A62, _dopri.A63, _dopri.A64, _dopri.A65
    np.testing.assert_allclose(A[:6, :5], RK45.A, rtol=0, atol=1e-15)
    B = np.array([_dopri.B1, 0, _dopri.B3, _dopri.B4, _dopri.B5, _dopri.B6])
    np.testing.assert_allclose(B, RK45.B, rtol=0, atol=1e-15)
    E = np.array([_dopri.E1, 0, _dopri.E3, _dopri.E4, _dopri.E5, _dopri.E6,
                  _dopri.E7])
    np.testing.assert_allclose(E, RK45.E, rtol=0, atol=1e-15)
    np.testing.assert_allclose(_dopri.P, RK45.P, rtol=0, atol=1e-15)


@given(z=st.floats(-30, 30), q=st.floats(1e-6, 1 - 1e-6), w=st.floats(-2, 0),
       d=st.sampled_from([0.5, 2.0, 5.0]), r=st.floats(0.1, 5),
       c=st.floats(0.05, 5))
def test_kernel_rhs_matches_physical_field(z, q, w, d, r, c):
    u = 1.0 / (1.0 + math.exp(-z))
    v = 1.0 - q
    du, dv, dw = rhs((u, v, w), ModelParams(d, r, c))
    dz, dq, dw4, dx = _dopri.rhs4(z, q, w, d, r, c)
    # z' = u' / (u (1 - u))
    assert dz == pytest.approx(du / (u * (1 - u)), rel=1e-9, abs=1e-12)
    assert dq == pytest.approx(-dv, abs=1e-15)
    assert dw4 == pytest.approx(dw, rel=1e-12, abs=1e-15)
    assert dx == pytest.approx(1 - u, rel=1e-12)


@given(z=st.floats(-10, 10), q=st.floats(0.01, 0.99), w=st.floats(-2, 0),
       r=st.floats(0.1, 5), c=st.floats(0.1, 5))
def test_kernel_jacobian_matches_finite_differences(z, q, w, r, c):
    d = 2.0
    s = np.array([z, q, w, 0.0])
    J = _dopri.jac4(z, q, w, d, r, c)
    h = 1e-6
    for j in range(3):
        sp, sm = s.copy(), s.copy()
        sp[j] += h
        sm[j] -= h
        col = (np.array(_dopri.rhs4(*sp[:3], d, r, c))
               - np.array(_dopri.rhs4(*sm[:3], d, r, c))) / (2 * h)
        np.testing.assert_allclose(J[:, j], col, rtol=1e-5, atol=1e-7)
    assert np.all(J[:, 3] == 0)


def test_expit_pair_keeps_relative_precision():
    u, a = _dopri.expit_pair(60.0)
    assert a == pytest.approx(math.exp(-60.0), rel=1e-14)
    assert u == 1.0
    u, a = _dopri.expit_pair(-60.0)
    assert u == pytest.approx(math.exp(-60.0), rel=1e-14)


def test_event_location_on_dense_interpolant():
    # q(t) = t on the unit step: v = 1 - q crosses zero at t = 1
    # shifted so that the root sits at t = 0.3
    s0 = np.array([0.0, 0.7, 0.0, 0.0])
    D = np.zeros((4, 4))
    D[1, 0] = 1.0
    t = _dopri._locate(_dopri.V_ZERO, s0, D, 1.0, 2.0, 1e-13)
    assert t == pytest.approx(0.3, abs=1e-12)


def test_high_certificate_sign():
    # v well above the threshold with a tiny 1 - u
    assert _dopri.high_certificate(1e-8, 0.2, -1e-3, 2.0, 1.0, 0.5) > 0
    # v + w/c negative: no certificate
    assert _dopri.high_certificate(1e-8, 0.2, -0.2, 2.0, 1.0, 0.5) < 0
    # outside the region
    assert _dopri.high_certificate(0.5, 0.2, 0.1, 2.0, 1.0, 0.5) < 0
    assert _dopri.high_certificate(1e-8, -0.1, -1e-3, 2.0, 1.0, 0.5) < 0
