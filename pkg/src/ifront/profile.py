"""Physical front profiles and their diagnostics.

The comoving coordinate is recovered from dxi/dy = 1 - u, integrated along
with the orbit (see ``desing.integrate``), so a profile is just the
trajectory resampled and shifted.  Diagnostics check the profile against
closed-form predictions: the speed identity ``c = r * int V(1-V) dxi``, the
exponential tail rates and the algebraic approach to the healthy state in
the desingularized variable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from .core import ModelParams, Regime, compute_rates
from .desing import EventKind, Trajectory

__all__ = [
    "TailsNotResolved",
    "TailFit",
    "Diagnostics",
    "FrontProfile",
    "CenterTailReport",
    "reconstruct",
    "speed_residual",
    "fit_tail_exponent",
    "tail_ratio",
    "effective_diffusion",
    "center_tail_check",
    "center_tail_report",
    "diagnose",
]

TAIL_FRACTION = 0.25
TAIL_SKIP = 2


class TailsNotResolved(ValueError):
    pass


@dataclass(frozen=True)
class TailFit:
    rate: float
    intercept: float
    residual_norm: float
    window: tuple[int, int]


@dataclass(frozen=True)
class Diagnostics:
    speed_residual: float = math.nan
    tail_gamma_fit: float = math.nan
    tail_lambda_fit: float = math.nan
    tail_mu_fit: float = math.nan
    tail_ratio_fit: float = math.nan
    center_manifold_residual: float = math.nan
    windows: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "speed_residual": self.speed_residual,
            "tail_gamma_fit": self.tail_gamma_fit,
            "tail_lambda_fit": self.tail_lambda_fit,
            "tail_mu_fit": self.tail_mu_fit,
            "tail_ratio_fit": self.tail_ratio_fit,
            "center_manifold_residual": self.center_manifold_residual,
        }


@dataclass(frozen=True, eq=False)
class FrontProfile:
    """Front sampled on a strictly increasing comoving grid.

    ``one_minus_U`` and ``one_minus_V`` are kept separately because 1 - U
    can be far below machine epsilon on slow fronts, and 1 - V is below it
    deep in the left tail.  ``y`` records the desingularized
    coordinate of every sample.
    """

    xi: np.ndarray
    U: np.ndarray
    V: np.ndarray
    one_minus_U: np.ndarray
    one_minus_V: np.ndarray
    y: np.ndarray
    params: ModelParams
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    trajectory: Trajectory | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.xi.shape[0]

    def tail_window(self, side: str) -> slice:
        """Index window of the outermost quarter of samples on one side,
        less the two extreme points."""
        n = len(self)
        k = max(int(TAIL_FRACTION * n), 10 + TAIL_SKIP)
        if side == "left":
            return slice(TAIL_SKIP, min(k, n))
        return slice(max(n - k, 0), n - TAIL_SKIP)


def _midpoint_value(params: ModelParams) -> float:
    if params.regime is Regime.HOMOGENEOUS:
        return 0.5
    return (2.0 - params.d) / 2.0


def _center_y(traj: Trajectory, target: float) -> float:
    """First y where u reaches ``target`` (u increases along a front)."""
    zt = float(logit(target))
    z = traj.z
    idx = np.nonzero(z >= zt)[0]
    if idx.size == 0 or idx[0] == 0:
        raise ValueError("trajectory does not cross the profile midpoint")
    k = int(idx[0])
    f = lambda yy: float(traj.evaluate_raw(yy)[0]) - zt
    return brentq(f, traj.y[k - 1], traj.y[k], xtol=1e-14, rtol=1e-15)


def reconstruct(
    traj: Trajectory,
    params: ModelParams | None = None,
    refine: int = 4,
    diagnostics: bool = True,
) -> FrontProfile:
    """Map a connecting orbit to the physical comoving coordinate.

    Parameters
    ----------
    traj : Trajectory
        Orbit on the High side of the front (as returned by the shooting).
    params : ModelParams, optional
        Defaults to the trajectory's parameters.
    refine : int
        Every integrator step is split into this many equal pieces using
        the dense output.
    diagnostics : bool
        Attach :class:`Diagnostics`; entries that cannot be resolved on the
        given tails are NaN.

    Notes
    -----
    xi is shifted so that xi = 0 where U equals the midpoint of its range.
    Once 1 - U drops below the floating-point resolution of xi, consecutive
    samples share the same xi; only the first of them is kept, which keeps
    the grid strictly increasing.
    """
    params = params or traj.params
    if traj.termination.kind in (EventKind.V_CROSSED_ZERO, EventKind.U_TURNED):
        raise ValueError("trajectory is not a connecting orbit "
                         f"(terminated by {traj.termination})")
    if not np.all(np.isfinite(traj.z)) and np.any(traj.z == np.inf):
        raise ValueError("trajectory reaches u = 1; the comoving map is singular")
    if len(traj) < 2:
        raise ValueError("trajectory has no steps")

    refine = max(int(refine), 1)
    if refine > 1:
        th = np.arange(refine) / refine
        yq = (traj.y[:-1, None] + th[None, :] * np.diff(traj.y)[:, None]).ravel()
        yq = np.append(yq, traj.y[-1])
        raw = traj.evaluate_raw(yq)
    else:
        yq, raw = traj.y.copy(), traj.raw.copy()

    keep = _strictly_new(raw[:, 3])
    yq, raw = yq[keep], raw[keep]
    xi = raw[:, 3]

    y0 = _center_y(traj, _midpoint_value(params))
    xi0 = float(traj.evaluate_raw(y0)[3])
    prof = FrontProfile(
        xi=xi - xi0,
        U=expit(raw[:, 0]),
        V=1.0 - raw[:, 1],
        one_minus_U=expit(-raw[:, 0]),
        one_minus_V=raw[:, 1].copy(),
        y=yq,
        params=params,
        trajectory=traj,
    )
    if diagnostics:
        prof = replace(prof, diagnostics=diagnose(prof, traj))
    return prof


def _strictly_new(xi: np.ndarray) -> np.ndarray:
    """Samples whose xi exceeds every earlier one."""
    run_max = np.maximum.accumulate(xi)
    out = np.empty(xi.shape, dtype=bool)
    out[0] = True
    out[1:] = xi[1:] > run_max[:-1]
    return out


def fit_tail_exponent(xs, ys, window=None) -> TailFit:
    """Least-squares slope of ``log(ys)`` against ``xs`` on ``window``.

    Parameters
    ----------
    xs, ys : array_like
    window : slice or (start, stop), optional
        Index range; the whole arrays by default.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if window is None:
        window = slice(0, xs.shape[0])
    elif not isinstance(window, slice):
        window = slice(*window)
    start, stop, _ = window.indices(xs.shape[0])
    x, yv = xs[start:stop], ys[start:stop]
    if x.size < 10:
        raise ValueError("tail window needs at least 10 points")
    if np.any(~(yv > 0)):
        raise ValueError("tail window contains nonpositive values")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, np.log(yv), rcond=None)
    res = float(np.linalg.norm(A @ coef - np.log(yv)))
    return TailFit(float(coef[0]), float(coef[1]), res, (start, stop))


def speed_residual(profile: FrontProfile, max_tail: float = 0.05) -> float:
    """Relative defect of the identity c = r * integral of V(1-V) dxi.

    Trapezoid rule on the profile grid, plus exponential tail corrections
    beyond both ends with rates fitted on the end windows (the closed-form
    rates when a fit is impossible).  When the profile stops short of its
    orbit (xi stalls in floating point on slow fronts), the rest of the
    orbit is added as the equal integral of v(1-v)(1-u) dy.

    Raises
    ------
    TailsNotResolved
        V(1-V) exceeds ``max_tail`` at either end of the orbit.
    """
    p = profile.params
    V = profile.V
    f = V * (1.0 - V)
    total = float(np.trapezoid(f, profile.xi))
    f_end = f[-1]
    traj = profile.trajectory
    if traj is not None and traj.y_end > profile.y[-1]:
        ys = traj.y
        yy = np.concatenate(([profile.y[-1]], ys[ys > profile.y[-1]]))
        th = np.arange(4) / 4.0
        yy = np.append((yy[:-1, None] + th * np.diff(yy)[:, None]).ravel(),
                       yy[-1])
        raw = traj.evaluate_raw(yy)
        v = 1.0 - raw[:, 1]
        g = v * raw[:, 1] * expit(-raw[:, 0])
        total += float(np.trapezoid(g, yy))
        f_end = v[-1] * raw[-1, 1]
    if f[0] > max_tail or f_end > max_tail:
        raise TailsNotResolved(
            f"V(1-V) at the ends is {f[0]:.3g}, {f_end:.3g} > {max_tail:g}")
    rates = compute_rates(p)
    if f[0] > 0:
        total += f[0] / _fit_or(profile.xi, f, profile.tail_window("left"),
                                rates.lam, sign=1.0)
    if f_end > 0:
        total += f_end / _fit_or(profile.xi, f, profile.tail_window("right"),
                                 rates.gamma, sign=-1.0)
    return abs(p.r * total - p.c) / p.c


def _fit_or(xs, ys, window, fallback, sign):
    """Decay rate of ys towards the tail, fitted if possible."""
    try:
        rate = sign * fit_tail_exponent(xs, ys, window).rate
    except ValueError:
        return fallback
    return rate if rate > 0 else fallback


def tail_ratio(profile: FrontProfile) -> float:
    """Median of V / (1 - U) over the right tail window."""
    w = profile.tail_window("right")
    a = profile.one_minus_U[w]
    V = profile.V[w]
    if a.size < 10 or np.any(~(a > 0)) or np.any(~(V > 0)):
        raise TailsNotResolved("right tail window is empty or degenerate")
    return float(np.median(V / a))


def effective_diffusion(profile: FrontProfile) -> tuple[np.ndarray, np.ndarray]:
    """Samples (V, phi) of the curve 1 - U = phi(V), sorted by V."""
    order = np.argsort(profile.V, kind="stable")
    return profile.V[order].copy(), profile.one_minus_U[order].copy()


@dataclass(frozen=True)
class CenterTailReport:
    manifold_residual: float
    u_product: float
    v_product: float
    u_deviation: float
    v_deviation: float

    @property
    def worst(self) -> float:
        return max(self.manifold_residual, self.u_deviation, self.v_deviation)


def center_tail_report(traj: Trajectory, params: ModelParams | None = None
                       ) -> CenterTailReport:
    """Compare the end of an orbit with the algebraic approach to (1, 0, 0).

    Near the healthy state the orbit lies on the graph
    w/c = -(r/c^2)(1-u)(v + w/c) and 1 - u ~ c/(r y),
    v + w/c ~ c(1+r)/(d r y).  The graph residual (relative to |w/c|) is
    the worst value over the last decade of y; the two products are taken
    at the end point.
    """
    params = params or traj.params
    d, r, c = params.d, params.r, params.c
    if traj.termination.kind in (EventKind.V_CROSSED_ZERO, EventKind.U_TURNED):
        raise TailsNotResolved("trajectory is not on the High side")
    y_end = traj.y_end
    if not y_end >= 50.0 / c:
        raise TailsNotResolved(f"y_end = {y_end:.3g} is below 50/c")
    sel = traj.y >= y_end / 10.0
    if np.count_nonzero(sel) < 2:
        raise TailsNotResolved("too few samples in the last decade of y")
    a = traj.one_minus_u[sel]
    v = traj.v[sel]
    w = traj.w[sel]
    vt = v + w / c
    graph = -(r / c**2) * a * vt
    resid = float(np.max(np.abs(w / c - graph) / np.abs(w / c)))
    u_prod = float(a[-1] * y_end)
    v_prod = float(vt[-1] * y_end)
    u_ref = c / r
    v_ref = c * (1.0 + r) / (d * r)
    return CenterTailReport(
        manifold_residual=resid,
        u_product=u_prod,
        v_product=v_prod,
        u_deviation=abs(u_prod - u_ref) / u_ref,
        v_deviation=abs(v_prod - v_ref) / v_ref,
    )


def center_tail_check(traj: Trajectory, params: ModelParams | None = None) -> float:
    """Worst relative deviation reported by :func:`center_tail_report`."""
    return center_tail_report(traj, params).worst


def diagnose(profile: FrontProfile, traj: Trajectory | None = None) -> Diagnostics:
    """All diagnostics of a profile; unresolvable entries are NaN."""
    p = profile.params
    lw, rw = profile.tail_window("left"), profile.tail_window("right")
    windows = {"left": (lw.start, lw.stop), "right": (rw.start, rw.stop)}
    out = {}

    def attempt(name, fn):
        try:
            out[name] = float(fn())
        except (ValueError, FloatingPointError):
            out[name] = math.nan

    left_state = p.left_state[0]
    attempt("speed_residual", lambda: speed_residual(profile))
    attempt("tail_gamma_fit",
            lambda: fit_tail_exponent(profile.xi, profile.one_minus_U, rw).rate)
    attempt("tail_lambda_fit",
            lambda: fit_tail_exponent(profile.xi, profile.one_minus_V, lw).rate)
    attempt("tail_mu_fit",
            lambda: fit_tail_exponent(profile.xi,
                                      np.abs(profile.U - left_state), lw).rate)
    attempt("tail_ratio_fit", lambda: tail_ratio(profile))
    if traj is not None:
        attempt("center_manifold_residual", lambda: center_tail_check(traj, p))
    return Diagnostics(windows=windows, **out)
