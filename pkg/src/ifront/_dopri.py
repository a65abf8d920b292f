"""Dormand-Prince 5(4) stepping for the desingularized front system.

The right-hand side is hard-wired so the whole loop compiles to machine
code; classification shots near the critical shooting parameter routinely
need 10^4 - 10^6 steps.

The kernel state is (z, q, w, x) with z = log(u / (1 - u)), q = 1 - v and
x the comoving coordinate, dx/dy = 1 - u.  In these variables u, 1 - u, v
and 1 - v all keep full relative precision: on slow fronts 1 - u drops far
below machine epsilon, and at the seed both u (or its offset) and 1 - v are
of the size of the seeding cutoff.  Step control weighs z absolutely-plus-
relatively and q relative to its distance from both 0 and 1.  x is carried
along as a pure quadrature and is left out of step control.

Dense output uses Shampine's quartic interpolant: on a step of size h from
state s0, ``s(y0 + t h) = s0 + h * Q @ (t, t^2, t^3, t^4)`` with
``Q = K.T @ P``.

Far out on the tail the orbit creeps towards its end state on the scale
of y itself while w still relaxes at rate c, so explicit steps are capped
near 3/c by stability.  Once the orbit is deep in the tail and the step
size has reached that cap, the kernel switches to the L-stable
Rosenbrock 2(3) pair of Shampine and Reichelt with an analytic Jacobian
and cubic Hermite dense output.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = (
    9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656,
)
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    -71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40,
)

P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423,
     69997945 / 29380423],
])

# termination codes
BUDGET = 0
V_ZERO = 1
U_TURN = 2
STEP_FAIL = 3
HIGH_CERT = 4
MAX_STEPS = 5

NVAR = 4
NCTRL = 3  # components entering the error norm
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@njit(cache=True)
def expit_pair(z):
    """(u, 1 - u) for u = 1 / (1 + exp(-z)), both to full relative accuracy."""
    if z >= 0.0:
        e = math.exp(-z)
        return 1.0 / (1.0 + e), e / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e), 1.0 / (1.0 + e)


@njit(cache=True)
def rhs4(z, q, w, d, r, c):
    u, a = expit_pair(z)
    v = 1.0 - q
    dz = (d * v - a) / c
    dw = -c * w - r * v * a * q
    return dz, -w, dw, a


@njit(cache=True)
def jac4(z, q, w, d, r, c):
    """Jacobian of (z', q', w', x') with respect to (z, q, w, x)."""
    u, a = expit_pair(z)
    ua = u * a
    J = np.zeros((NVAR, NVAR))
    J[0, 0] = ua / c
    J[0, 1] = -d / c
    J[1, 2] = -1.0
    J[2, 0] = r * (1.0 - q) * q * ua
    J[2, 1] = -r * a * (1.0 - 2.0 * q)
    J[2, 2] = -c
    J[3, 0] = -ua
    return J


@njit(cache=True)
def _interp(s0, D, t):
    """Dense output s0 + D @ (t, t^2, t^3, t^4)."""
    t2 = t * t
    out = np.empty(NVAR)
    for i in range(NVAR):
        out[i] = s0[i] + (D[i, 0] * t + D[i, 1] * t2 + D[i, 2] * t2 * t
                          + D[i, 3] * t2 * t2)
    return out


@njit(cache=True)
def _event_value(kind, s, d):
    if kind == V_ZERO:
        return 1.0 - s[1]
    # u + d v - 1
    return d * (1.0 - s[1]) - expit_pair(s[0])[1]


@njit(cache=True)
def _locate(kind, s0, D, h, d, tol):
    """Bisect the dense interpolant for a sign change of the event function
    on (0, 1]; the function is positive at t=0 and non-positive at t=1."""
    lo, hi = 0.0, 1.0
    while (hi - lo) * abs(h) > tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _event_value(kind, _interp(s0, D, mid), d) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def high_certificate(a, v, w, d, r, c):
    """Positive once the orbit provably converges to (1, v_inf, 0), v_inf > 0.

    Here a = 1 - u.  With b = v + w/c the tail obeys
    a' = a(1-a)(a - d v)/c and b' = -(r/c) v a (1 - v).  If
    b > a/d + 2 sqrt(r v a / (d (1-a))), v stays above a positive level,
    a decays exponentially and b keeps a positive limit.  Only meaningful
    while w < 0.
    """
    if v <= 0.0 or w >= 0.0 or a <= 0.0 or a >= 1.0:
        return -1.0
    b = v + w / c
    return b - a / d - 2.0 * math.sqrt(r * v * a / (d * (1.0 - a)))


@njit(cache=True)
def _scale(i, x, atol, rtol):
    if not math.isfinite(x):
        return math.inf
    if i == 1:
        return atol + rtol * min(abs(x), abs(1.0 - x))
    return atol + rtol * abs(x)


@njit(cache=True)
def _initial_step(s0, f0, d, r, c, rtol, atol, span):
    d0 = 0.0
    d1 = 0.0
    for i in range(NCTRL):
        sc = _scale(i, s0[i], atol, rtol)
        if math.isfinite(sc):
            d0 += (s0[i] / sc) ** 2
            d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / NCTRL)
    d1 = math.sqrt(d1 / NCTRL)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    s1 = s0 + h0 * f0
    f1 = np.empty(NVAR)
    f1[0], f1[1], f1[2], f1[3] = rhs4(s1[0], s1[1], s1[2], d, r, c)
    d2 = 0.0
    for i in range(NCTRL):
        sc = _scale(i, s0[i], atol, rtol)
        if math.isfinite(sc):
            d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / NCTRL) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, span)


@njit(cache=True)
def _err_norm(err, s, s_new, atol, rtol):
    en = 0.0
    for i in range(NCTRL):
        sc = max(_scale(i, s[i], atol, rtol), _scale(i, s_new[i], atol, rtol))
        if math.isfinite(sc):
            en += (err[i] / sc) ** 2
    return math.sqrt(en / NCTRL)


@njit(cache=True)
def _dopri_step(s, f, h, d, r, c, K, s_new, err, D):
    """One Dormand-Prince step; fills s_new, err (absolute) and D."""
    K[0, :] = f
    for i in range(NVAR):
        s_new[i] = s[i] + h * A21 * K[0, i]
    K[1, 0], K[1, 1], K[1, 2], K[1, 3] = rhs4(s_new[0], s_new[1], s_new[2],
                                              d, r, c)
    for i in range(NVAR):
        s_new[i] = s[i] + h * (A31 * K[0, i] + A32 * K[1, i])
    K[2, 0], K[2, 1], K[2, 2], K[2, 3] = rhs4(s_new[0], s_new[1], s_new[2],
                                              d, r, c)
    for i in range(NVAR):
        s_new[i] = s[i] + h * (A41 * K[0, i] + A42 * K[1, i] + A43 * K[2, i])
    K[3, 0], K[3, 1], K[3, 2], K[3, 3] = rhs4(s_new[0], s_new[1], s_new[2],
                                              d, r, c)
    for i in range(NVAR):
        s_new[i] = s[i] + h * (A51 * K[0, i] + A52 * K[1, i] + A53 * K[2, i]
                               + A54 * K[3, i])
    K[4, 0], K[4, 1], K[4, 2], K[4, 3] = rhs4(s_new[0], s_new[1], s_new[2],
                                              d, r, c)
    for i in range(NVAR):
        s_new[i] = s[i] + h * (A61 * K[0, i] + A62 * K[1, i] + A63 * K[2, i]
                               + A64 * K[3, i] + A65 * K[4, i])
    K[5, 0], K[5, 1], K[5, 2], K[5, 3] = rhs4(s_new[0], s_new[1], s_new[2],
                                              d, r, c)
    for i in range(NVAR):
        s_new[i] = s[i] + h * (B1 * K[0, i] + B3 * K[2, i] + B4 * K[3, i]
                               + B5 * K[4, i] + B6 * K[5, i])
    K[6, 0], K[6, 1], K[6, 2], K[6, 3] = rhs4(s_new[0], s_new[1], s_new[2],
                                              d, r, c)
    for i in range(NVAR):
        err[i] = h * (E1 * K[0, i] + E3 * K[2, i] + E4 * K[3, i]
                      + E5 * K[4, i] + E6 * K[5, i] + E7 * K[6, i])
        for j in range(4):
            acc = 0.0
            for k in range(7):
                acc += K[k, i] * P[k, j]
            D[i, j] = h * acc


ROS_D = 1.0 / (2.0 + math.sqrt(2.0))
ROS_E32 = 6.0 + math.sqrt(2.0)


@njit(cache=True)
def _rosenbrock_step(s, f, h, d, r, c, s_new, f_new, err, D):
    """One step of the Rosenbrock 2(3) pair; fills s_new, f_new, err, D."""
    J = jac4(s[0], s[1], s[2], d, r, c)
    W = np.eye(NVAR) - (h * ROS_D) * J
    k1 = np.linalg.solve(W, f)
    mid = s + 0.5 * h * k1
    F1 = np.empty(NVAR)
    F1[0], F1[1], F1[2], F1[3] = rhs4(mid[0], mid[1], mid[2], d, r, c)
    k2 = np.linalg.solve(W, F1 - k1) + k1
    for i in range(NVAR):
        s_new[i] = s[i] + h * k2[i]
    f_new[0], f_new[1], f_new[2], f_new[3] = rhs4(s_new[0], s_new[1],
                                                  s_new[2], d, r, c)
    k3 = np.linalg.solve(W, f_new - ROS_E32 * (k2 - F1) - 2.0 * (k1 - f))
    for i in range(NVAR):
        err[i] = h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i])
        # cubic Hermite through both ends
        delta = s_new[i] - s[i]
        D[i, 0] = h * f[i]
        D[i, 1] = 3.0 * delta - h * (2.0 * f[i] + f_new[i])
        D[i, 2] = h * (f[i] + f_new[i]) - 2.0 * delta
        D[i, 3] = 0.0


# switch to the implicit pair once explicit steps reach STIFF_HC / c while
# 1 - u and v are both below TAIL_LEVEL
STIFF_HC = 2.0
TAIL_LEVEL = 0.2


@njit(cache=True)
def _finish(code, y, s, ys, states, dense, n_rec, y_uturn, n_steps):
    return (code, y, s, ys[:n_rec].copy(), states[:n_rec].copy(),
            dense[:max(n_rec - 1, 0)].copy(), y_uturn, n_steps)


@njit(cache=True)
def integrate_kernel(y0, s_init, y_end, d, r, c, rtol, atol, h_min,
                     event_tol, arm_gap, stop_on_uturn, stop_on_high,
                     record, max_steps, allow_stiff):
    """Advance (z, q, w, x) from ``y0`` towards ``y_end``.

    Returns (code, y_stop, s_stop, ys, states, dense, y_uturn, n_steps).
    ``dense[k]`` holds the flattened 4x4 matrix D of the recorded step from
    ``ys[k]`` to ``ys[k+1]``: with theta in [0, 1] the state is
    ``states[k] + D @ (theta, theta^2, theta^3, theta^4)``.  ``y_uturn`` is
    NaN unless the downward crossing of u + d v = 1 was passed.
    """
    cap = 1024 if record else 1
    ys = np.empty(cap)
    states = np.empty((cap, NVAR))
    dense = np.empty((cap, 4 * NVAR))
    n_rec = 0
    if record:
        ys[0] = y0
        states[0, :] = s_init
        n_rec = 1

    s = s_init.copy()
    y = y0
    f = np.empty(NVAR)
    f[0], f[1], f[2], f[3] = rhs4(s[0], s[1], s[2], d, r, c)
    h = _initial_step(s, f, d, r, c, rtol, atol, y_end - y0)
    armed = s[1] > arm_gap
    y_uturn = np.nan
    K = np.empty((7, NVAR))
    D = np.empty((NVAR, 4))
    s_new = np.empty(NVAR)
    f_new = np.empty(NVAR)
    err = np.empty(NVAR)
    n_steps = 0
    stiff = False

    if armed and _event_value(U_TURN, s, d) <= 0.0:
        y_uturn = y
        if stop_on_uturn:
            return _finish(U_TURN, y, s, ys, states, dense, n_rec, y_uturn,
                           n_steps)

    while True:
        if y >= y_end:
            return _finish(BUDGET, y, s, ys, states, dense, n_rec, y_uturn,
                           n_steps)
        if n_steps >= max_steps:
            return _finish(MAX_STEPS, y, s, ys, states, dense, n_rec,
                           y_uturn, n_steps)
        if not h >= h_min or y + h == y:
            return _finish(STEP_FAIL, y, s, ys, states, dense, n_rec,
                           y_uturn, n_steps)
        if y + h > y_end:
            h = y_end - y

        if stiff:
            _rosenbrock_step(s, f, h, d, r, c, s_new, f_new, err, D)
        else:
            _dopri_step(s, f, h, d, r, c, K, s_new, err, D)
            for i in range(NVAR):
                f_new[i] = K[6, i]
        en = _err_norm(err, s, s_new, atol, rtol)
        expo = -1.0 / 3.0 if stiff else -0.2

        if not (en <= 1.0):
            if en != en:
                fac = MIN_FACTOR
            else:
                fac = max(MIN_FACTOR, SAFETY * en ** expo)
            h *= fac
            continue

        n_steps += 1
        y_new = y + h

        # events inside the accepted step: earliest one wins
        code = -1
        t_hit = 2.0
        if s[1] < 1.0 and s_new[1] >= 1.0:
            code = V_ZERO
            t_hit = _locate(V_ZERO, s, D, h, d, event_tol)
        if y_uturn != y_uturn:
            g0 = _event_value(U_TURN, s, d)
            g1 = _event_value(U_TURN, s_new, d)
            t_u = 2.0
            if g1 <= 0.0 and (armed or s_new[1] > arm_gap):
                if g0 > 0.0:
                    t_u = _locate(U_TURN, s, D, h, d, event_tol)
                else:
                    # already below when the event became armed
                    t_u = 1.0
            if t_u <= 1.0:
                y_uturn = y + t_u * h
                if stop_on_uturn and t_u <= t_hit:
                    code = U_TURN
                    t_hit = t_u
        if s_new[1] > arm_gap:
            armed = True

        if code >= 0:
            y_hit = y + t_hit * h
            s_hit = _interp(s, D, t_hit)
            if record:
                ys, states, dense = _append(ys, states, dense, n_rec, y_hit,
                                            s_hit, D, t_hit)
                n_rec += 1
            return _finish(code, y_hit, s_hit, ys, states, dense, n_rec,
                           y_uturn, n_steps)

        if record:
            ys, states, dense = _append(ys, states, dense, n_rec, y_new,
                                        s_new, D, 1.0)
            n_rec += 1

        y = y_new
        for i in range(NVAR):
            s[i] = s_new[i]
            f[i] = f_new[i]
        a = expit_pair(s[0])[1]

        if stop_on_high:
            if high_certificate(a, 1.0 - s[1], s[2], d, r, c) > 0.0:
                return _finish(HIGH_CERT, y, s, ys, states, dense, n_rec,
                               y_uturn, n_steps)

        if en == 0.0:
            fac = MAX_FACTOR
        else:
            fac = min(MAX_FACTOR, SAFETY * en ** expo)
        h *= fac
        if (allow_stiff and not stiff and h * c >= STIFF_HC
                and a < TAIL_LEVEL and 1.0 - s[1] < TAIL_LEVEL):
            stiff = True


@njit(cache=True)
def _append(ys, states, dense, n, y_new, s_new, D, t):
    """Store sample n, reached after the fraction t of a step with
    dense-output matrix D."""
    if n >= ys.shape[0]:
        cap = 2 * ys.shape[0]
        ys2 = np.empty(cap)
        st2 = np.empty((cap, NVAR))
        de2 = np.empty((cap, 4 * NVAR))
        ys2[:n] = ys[:n]
        st2[:n] = states[:n]
        de2[:n] = dense[:n]
        ys, states, dense = ys2, st2, de2
    ys[n] = y_new
    states[n, :] = s_new
    # rescale the interpolant to the truncated step
    for i in range(NVAR):
        for j in range(4):
            dense[n - 1, 4 * i + j] = D[i, j] * t ** (j + 1)
    return ys, states, dense
