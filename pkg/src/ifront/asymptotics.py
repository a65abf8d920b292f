"""Leading-order description of slow fronts.

For small speeds the u-transition is fast and v is close to a Fisher-KPP
profile cut off by pure exponential decay where u has switched on.  This
module evaluates that two-scale picture: the matched v-profile (numerically
and in closed form), the implicit fast profile of u, the resulting sharp
front in the physical variable and the effective diffusion it induces.

Throughout, ``lambda`` denotes the Fisher-KPP decay rate of 1 - v on the
left, the positive root of l (l + c) = r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .core import ModelParams

__all__ = [
    "CalibrationFailed",
    "PiecewiseV0",
    "SlowFrontApprox",
    "SpeedBounds",
    "Flatness",
    "fkpp_lambda",
    "fkpp_v0",
    "hat_v0",
    "solve_u0",
    "calibration_integral",
    "calibrate_alpha",
    "phi_map",
    "sharp_profile",
    "align_with_front",
    "front_deviation",
    "phi0_flatness",
    "scalar_minimal_speed_bounds",
    "large_m_speed",
]

SEED_EPS = 1e-8
U0_ZTOL = 1e-12
TAIL_TOL = 1e-10
CAL_RTOL = 1e-10


class CalibrationFailed(RuntimeError):
    pass


def fkpp_lambda(params: ModelParams) -> float:
    """Positive root of l (l + c) = r."""
    c, r = params.c, params.r
    return 2.0 * r / (c + math.sqrt(c * c + 4.0 * r))


def _check_damped(params: ModelParams) -> None:
    if not params.c < 2.0 * math.sqrt(params.r):
        raise ValueError(
            f"c = {params.c!r} >= 2 sqrt(r): the Fisher-KPP profile stays "
            "positive and the matched v-profile does not exist")


@dataclass(frozen=True, eq=False)
class PiecewiseV0:
    """Matched v-profile sampled on ``y``.

    Left of the origin it is the Fisher-KPP front translated so that
    v' + c v vanishes at 0; right of it, ``v_at_0 * exp(-c y)``.
    ``slope_at_0`` is the left derivative at the origin.
    """

    y: np.ndarray
    v: np.ndarray
    v_at_0: float
    slope_at_0: float
    params: ModelParams
    _sol: object = None
    _y_seed: float = math.nan

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.empty(y.shape)
        right = y >= 0.0
        out[right] = self.v_at_0 * np.exp(-self.params.c * y[right])
        left = ~right
        inside = left & (y >= self._y_seed)
        if np.any(inside):
            out[inside] = self._sol(y[inside])[0]
        far = left & (y < self._y_seed)
        if np.any(far):
            lam = fkpp_lambda(self.params)
            out[far] = 1.0 - SEED_EPS * np.exp(lam * (y[far] - self._y_seed))
        return out


def fkpp_v0(params: ModelParams, grid=None) -> PiecewiseV0:
    """Matched v-profile of the slow-front expansion.

    Parameters
    ----------
    params : ModelParams
        Requires 0 < c < 2 sqrt(r).
    grid : array_like, optional
        Sample points; default 2001 points on [-30, 30].

    Notes
    -----
    The Fisher-KPP front is launched from 1 - exp(lambda y) at
    1 - v = 1e-8 and integrated with DOP853 until psi = v' + c v changes
    sign; the translation puts that zero at y = 0.
    """
    _check_damped(params)
    c, r = params.c, params.r
    lam = fkpp_lambda(params)
    grid = np.linspace(-30.0, 30.0, 2001) if grid is None else np.asarray(
        grid, dtype=float)

    def f(_, s):
        return [s[1], -c * s[1] - r * s[0] * (1.0 - s[0])]

    def psi(_, s):
        return s[1] + c * s[0]
    psi.terminal = True
    psi.direction = -1

    y0 = math.log(SEED_EPS) / lam
    sol = solve_ivp(f, (y0, y0 + 1e4), [1.0 - SEED_EPS, -lam * SEED_EPS],
                    method="DOP853", rtol=1e-12, atol=1e-14, events=psi,
                    dense_output=True)
    if sol.status != 1 or sol.t_events[0].size == 0:
        raise RuntimeError("v' + c v did not vanish along the Fisher-KPP front")
    y1 = float(sol.t_events[0][0])
    v0, dv0 = (float(x) for x in sol.y_events[0][0])
    dense = sol.sol

    def shifted(y):
        return dense(np.asarray(y) + y1)

    out = PiecewiseV0(grid, np.empty(0), v0, dv0, params, shifted, y0 - y1)
    object.__setattr__(out, "v", out(grid))
    return out


def hat_v0(y, params: ModelParams):
    """Closed-form matched v-profile.

    1 - c/(c+lambda) exp(lambda y) for y <= 0 and lambda/(c+lambda) exp(-c y)
    for y >= 0.
    """
    c = params.c
    lam = fkpp_lambda(params)
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore"):
        out = np.where(y <= 0.0,
                       1.0 - c / (c + lam) * np.exp(np.minimum(lam * y, 0.0)),
                       lam / (c + lam) * np.exp(-c * np.maximum(y, 0.0)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SlowFrontApprox:
    """Calibrated leading-order slow front.

    ``b = d v0(0) - 1``, ``alpha_cal`` the constant of the implicit
    u-profile, ``kappa = (c/b) log((1+b) alpha_cal / b)`` and ``xi_star``
    the point of the sharp profile mapped to y = 0.
    """

    b: float
    alpha_cal: float
    kappa: float
    xi_star: float
    params: ModelParams

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"b = {self.b!r} must be positive (v0(0) > 1/d)")
        if not self.alpha_cal > 0:
            raise ValueError("alpha_cal must be positive")
        if not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite")
        if not self.xi_star < 0:
            raise ValueError("xi_star must be negative")

    @classmethod
    def from_alpha(cls, params: ModelParams, alpha: float,
                   b: float | None = None) -> "SlowFrontApprox":
        """Assemble the approximation for a given constant ``alpha``."""
        b = _b_from_hat(params) if b is None else float(b)
        c = params.c
        kappa = (c / b) * math.log((1.0 + b) * alpha / b)
        xi_star = _phi_inverse_zero(b, c, kappa)
        return cls(b, float(alpha), kappa, xi_star, params)


def _b_from_hat(params: ModelParams) -> float:
    _check_damped(params)
    b = params.d * float(hat_v0(0.0, params)) - 1.0
    if not b > 0:
        raise ValueError(
            f"d * v0(0) = {b + 1.0:.6g} <= 1: speed too large for the "
            "slow-front expansion")
    return b


def _log_gap(xi, b, c):
    """log(1 - exp(b xi / c)) for xi < 0, accurate near 0 and -infinity."""
    return np.log(-np.expm1(b * np.asarray(xi, dtype=float) / c))


def _phi_from(xi, p, b, c, kappa):
    return xi - c / (1.0 + b) * p - kappa


def phi_map(xi, approx: SlowFrontApprox):
    """Map from the sharp-front coordinate xi < 0 to y."""
    b, c = approx.b, approx.params.c
    xi = np.asarray(xi, dtype=float)
    return _phi_from(xi, _log_gap(xi, b, c), b, c, approx.kappa)


def _phi_inverse_zero(b: float, c: float, kappa: float) -> float:
    def g(xi):
        return float(_phi_from(xi, _log_gap(xi, b, c), b, c, kappa))

    hi = -1e-300
    lo = -1.0
    while g(lo) >= 0.0:
        lo *= 2.0
        if lo < -1e300:
            raise ValueError("no zero of the sharp-front map")
    return brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def _u0_residual(z, b, c, log_rhs):
    """Increasing in z; zero where u = expit(z) solves the implicit relation."""
    log_u = -np.logaddexp(0.0, -z)
    log_1mu = -np.logaddexp(0.0, z)
    u = np.exp(log_u)
    return (1.0 + b) * log_u - b * log_1mu - np.log(b + u) - log_rhs


def _log_rhs(y, b, c, alpha):
    return (1.0 + b) * math.log(alpha) - math.log(b) + b * (1.0 + b) * y / c


def solve_u0(y, approx: SlowFrontApprox, alpha: float | None = None):
    """Fast u-profile from its implicit relation.

    Solves ``u^(1+b) / ((1-u)^b (b+u)) = alpha^(1+b)/b exp(b(1+b) y/c)`` by
    bisection in z = log(u/(1-u)), which resolves u and 1 - u to about
    1e-12 relative.  ``alpha`` defaults to ``approx.alpha_cal``.
    """
    b, c = approx.b, approx.params.c
    alpha = approx.alpha_cal if alpha is None else alpha
    y = np.asarray(y, dtype=float)
    target = _log_rhs(y, b, c, alpha)
    lo = np.full(y.shape, -50.0)
    hi = np.full(y.shape, 50.0)
    while True:
        bad = _u0_residual(lo, b, c, target) > 0.0
        if not np.any(bad):
            break
        lo = np.where(bad, 2.0 * lo, lo)
    while True:
        bad = _u0_residual(hi, b, c, target) < 0.0
        if not np.any(bad):
            break
        hi = np.where(bad, 2.0 * hi, hi)
    while np.any(hi - lo > U0_ZTOL):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        neg = _u0_residual(mid, b, c, target) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    z = 0.5 * (lo + hi)
    u = 1.0 / (1.0 + np.exp(-z))
    return u if u.ndim else float(u)


def _one_minus_u0_unit(y, b, c):
    """1 - u0 for alpha = 1, via a scalar root find in z."""
    t = _log_rhs(y, b, c, 1.0)
    f = lambda z: float(_u0_residual(z, b, c, t))
    lo, hi = -50.0, 50.0
    while f(lo) > 0:
        lo *= 2.0
    while f(hi) < 0:
        hi *= 2.0
    z = brentq(f, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    return 1.0 / (1.0 + math.exp(z)) if z > -700 else 1.0


def calibration_integral(shift: float, params: ModelParams, b: float) -> float:
    """r * integral of vhat (1 - vhat)(1 - u0(y + shift)) with alpha = 1.

    Using ``alpha = exp(b shift / c)`` in the implicit relation moves u0 by
    ``shift``, so this is the speed predicted by that constant.
    """
    c, r = params.c, params.r
    lam = fkpp_lambda(params)

    def integrand(y):
        vh = float(hat_v0(y, params))
        return vh * (1.0 - vh) * _one_minus_u0_unit(y + shift, b, c)

    # tail bounds: left by integral of 1 - vhat, right by integral of vhat
    # times the value of 1 - u0 at the cut
    Y = 8.0
    while True:
        left = c / (lam * (c + lam)) * math.exp(-lam * Y)
        right = (lam / (c * (c + lam)) * math.exp(-c * Y)
                 * _one_minus_u0_unit(Y + shift, b, c))
        if left < TAIL_TOL and right < TAIL_TOL:
            break
        Y *= 1.5
    pts = sorted({0.0, min(max(-shift, -Y), Y)})
    val, _ = quad(integrand, -Y, Y, points=pts, limit=500,
                  epsabs=1e-14, epsrel=1e-12)
    return r * val


def calibrate_alpha(params: ModelParams) -> SlowFrontApprox:
    """Fix the constant of the implicit u-profile by the speed identity.

    The integral is strictly decreasing in the shift; the bracket search
    checks this on every new point and gives up otherwise.

    Raises
    ------
    CalibrationFailed
        The integral cannot reach c (speed too large for the expansion).
    ValueError
        c >= 2 sqrt(r), or d * vhat0(0) <= 1.
    """
    b = _b_from_hat(params)
    c = params.c

    def g(s):
        return calibration_integral(s, params, b) - c

    seen: list[tuple[float, float]] = []

    def probe(s):
        val = g(s)
        seen.append((s, val))
        order = sorted(seen)
        vals = [v for _, v in order]
        if any(v2 >= v1 for v1, v2 in zip(vals, vals[1:])):
            raise CalibrationFailed("calibration integral is not monotone "
                                    "in the shift")
        return val

    step = max(c, 1e-3)
    a, ga = 0.0, probe(0.0)
    for _ in range(200):
        s = a + step if ga > 0 else a - step
        gs = probe(s)
        if gs == 0.0 or (gs > 0) != (ga > 0):
            lo, hi = sorted((a, s))
            break
        a, ga = s, gs
        step *= 2.0
        if abs(s) > 1e6:
            break
    else:
        lo = hi = math.nan
    if not math.isfinite(lo) or (lo == hi == a):
        raise CalibrationFailed(
            f"r * integral never crosses c = {c!r}: speed too large for the "
            "slow-front expansion")
    s = brentq(g, lo, hi, xtol=1e-14, rtol=CAL_RTOL)
    alpha = math.exp(b * s / c)
    return SlowFrontApprox.from_alpha(params, alpha, b)


def sharp_profile(approx: SlowFrontApprox, xi_grid):
    """Leading-order sharp front (U0, V0) on a grid of negative xi."""
    xi = np.asarray(xi_grid, dtype=float)
    if np.any(~(xi < 0.0)):
        raise ValueError("the sharp profile is defined only for xi < 0")
    b, c = approx.b, approx.params.c
    e = np.exp(b * xi / c)
    U0 = b * e / (1.0 + b - e)
    y = phi_map(xi, approx)
    V0 = hat_v0(y, approx.params)
    return U0, np.asarray(V0, dtype=float)


def _xi_at_half(approx: SlowFrontApprox) -> float:
    b, c = approx.b, approx.params.c
    return (c / b) * math.log((1.0 + b) / (1.0 + 2.0 * b))


def align_with_front(approx: SlowFrontApprox, xi, U) -> np.ndarray:
    """Translate a front's xi so that U = 1/2 where the sharp U0 = 1/2.

    ``U`` must be increasing along ``xi``.
    """
    xi = np.asarray(xi, dtype=float)
    return xi - np.interp(0.5, np.asarray(U, dtype=float), xi) + _xi_at_half(
        approx)


def front_deviation(approx: SlowFrontApprox, xi, U, V) -> tuple[float, float]:
    """Sup-norm distances (V, U) between a front and the sharp profile.

    The front is first aligned with :func:`align_with_front`; the sup runs
    over the front's samples with aligned xi < 0, the domain of the sharp
    profile.
    """
    xs = align_with_front(approx, xi, U)
    neg = xs < 0.0
    if not np.any(neg):
        raise ValueError("no front samples on the sharp profile's domain")
    U0, V0 = sharp_profile(approx, xs[neg])
    V = np.asarray(V, dtype=float)[neg]
    U = np.asarray(U, dtype=float)[neg]
    return float(np.max(np.abs(V - V0))), float(np.max(np.abs(U - U0)))


class Flatness(NamedTuple):
    """Exponent and prefactor of phi0(v) ~ beta ((c+lambda) v / lambda)^m
    near v = 0, with the sampled curve (v, phi0(v)) sorted by v."""

    m: float
    beta: float
    v: np.ndarray
    phi: np.ndarray


def phi0_flatness(approx: SlowFrontApprox, n: int = 400) -> Flatness:
    """Effective diffusion of the sharp front and its flatness at v = 0.

    The curve is sampled through p = log(1 - exp(b xi / c)), so that the
    region where 1 - U0 is astronomically small is resolved.
    """
    b, c = approx.b, approx.params.c
    m = (1.0 + b) / c**2
    log_beta = (math.log(b) - math.log(b + 1.0)
                - (1.0 + b) * math.log(approx.alpha_cal)) / b
    p = -np.exp(np.linspace(math.log(1e-12), math.log(700.0), n))
    xi = (c / b) * np.log1p(-np.exp(p))
    one_minus_U0 = (1.0 + b) * np.exp(p) / (b + np.exp(p))
    y = _phi_from(xi, p, b, c, approx.kappa)
    V0 = np.asarray(hat_v0(y, approx.params), dtype=float)
    order = np.argsort(V0, kind="stable")
    return Flatness(m, math.exp(log_beta), V0[order], one_minus_U0[order])


class SpeedBounds(NamedTuple):
    lower: float
    upper: float


def scalar_minimal_speed_bounds(D: float, r: float, m: float) -> SpeedBounds:
    """Bounds on the minimal speed of V_t = D (V^m V_x)_x + r V (1 - V).

    2 D r / ((m+1)(m+2)) <= c_min <= 2 D r / (m (m+1)).
    """
    if not (D > 0 and r > 0 and m >= 1):
        raise ValueError("need D > 0, r > 0 and m >= 1")
    return SpeedBounds(2.0 * D * r / ((m + 1.0) * (m + 2.0)),
                       2.0 * D * r / (m * (m + 1.0)))


def large_m_speed(D: float, r: float, m: float) -> float:
    """Large-m estimate sqrt(2 D r) / m of the same minimal speed."""
    if not (D > 0 and r > 0 and m >= 1):
        raise ValueError("need D > 0, r > 0 and m >= 1")
    return math.sqrt(2.0 * D * r) / m
