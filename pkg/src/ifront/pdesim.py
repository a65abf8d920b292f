"""Explicit finite-volume simulation of the reduced PDE system.

    U_t = U (1 - U - d V)
    V_t = ((1 - U) V_x)_x + r V (1 - V)

on a bounded interval with zero-flux ends.  Face diffusivities use the
arithmetic mean of U, cut off at zero, so the scheme is conservative and
nothing diffuses into cells where U = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import ModelParams

__all__ = [
    "CflViolation",
    "FrontHitBoundary",
    "Grid1D",
    "FieldPair",
    "PositionSeries",
    "RunResult",
    "U_CAP",
    "heaviside_initial",
    "cfl_bound",
    "step",
    "front_position",
    "run",
]

# initial U is kept below 1 (the problem degenerates at U = 1)
U_CAP = 1.0 - 1e-6
DIFF_CFL = 0.4
REACT_CFL = 0.1
BUFFER = 0.1


class CflViolation(ValueError):
    pass


class FrontHitBoundary(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    nx: int

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 16:
            raise ValueError("nx must be an integer >= 16")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)


@dataclass(frozen=True, eq=False)
class FieldPair:
    """Cell values of U and V at time ``t``.

    ``clamped`` is the largest amount by which the last update had to be
    clipped back into [0, 1].
    """

    U: np.ndarray
    V: np.ndarray
    t: float = 0.0
    clamped: float = 0.0


class PositionSeries(NamedTuple):
    t: np.ndarray
    x: np.ndarray


class RunResult(NamedTuple):
    fields: FieldPair
    measured_speed: float
    positions: PositionSeries
    frames: list


def heaviside_initial(grid: Grid1D, params: ModelParams, x0: float) -> FieldPair:
    """Left state for x < x0, healthy state (1, 0) for x >= x0, U capped."""
    if not grid.x_min < x0 < grid.x_max:
        raise ValueError("x0 must lie inside the grid")
    x = grid.x
    u_left, v_left = params.left_state
    U = np.where(x < x0, u_left, 1.0)
    V = np.where(x < x0, v_left, 0.0)
    return FieldPair(np.minimum(U, U_CAP), V.astype(float), 0.0)


def cfl_bound(fields: FieldPair, grid: Grid1D, params: ModelParams) -> float:
    """Largest stable time step for the current fields."""
    fmax = float(np.max(np.maximum(1.0 - fields.U, 0.0)))
    react = REACT_CFL / max(params.r, params.d, 1.0)
    if fmax == 0.0:
        return react
    return min(DIFF_CFL * grid.dx**2 / (2.0 * fmax), react)


def step(fields: FieldPair, dt: float, grid: Grid1D, params: ModelParams
         ) -> FieldPair:
    """One forward Euler step.

    Raises
    ------
    CflViolation
        ``dt`` exceeds :func:`cfl_bound`.
    """
    bound = cfl_bound(fields, grid, params)
    if not 0.0 < dt <= bound * (1.0 + 1e-12):
        raise CflViolation(f"dt = {dt!r} outside (0, {bound!r}]")
    U, V = fields.U, fields.V
    dx = grid.dx
    diff = np.maximum(1.0 - 0.5 * (U[1:] + U[:-1]), 0.0)
    flux = diff * np.diff(V) / dx
    div = np.empty_like(V)
    div[0] = flux[0]
    div[1:-1] = np.diff(flux)
    div[-1] = -flux[-1]
    div /= dx
    U_new = U + dt * U * (1.0 - U - params.d * V)
    V_new = V + dt * (div + params.r * V * (1.0 - V))
    Uc = np.clip(U_new, 0.0, 1.0)
    Vc = np.clip(V_new, 0.0, 1.0)
    clamped = max(float(np.max(np.abs(Uc - U_new))),
                  float(np.max(np.abs(Vc - V_new))))
    return FieldPair(Uc, Vc, fields.t + dt, clamped)


@njit(cache=True)
def _advance(U, V, t, t_next, dx, d, r, safety):
    """Repeat the update of :func:`step` in place up to ``t_next``.

    Returns the largest clamp applied on the way.
    """
    n = U.shape[0]
    react = REACT_CFL / max(r, d, 1.0)
    flux = np.empty(n - 1)
    clamped = 0.0
    while t < t_next:
        fmax = 0.0
        for i in range(n):
            fmax = max(fmax, 1.0 - U[i])
        bound = react if fmax == 0.0 else min(
            DIFF_CFL * dx * dx / (2.0 * fmax), react)
        dt = safety * bound
        if t + dt >= t_next or t_next - (t + dt) < 1e-12:
            dt = t_next - t
        for i in range(n - 1):
            f = max(1.0 - 0.5 * (U[i] + U[i + 1]), 0.0)
            flux[i] = f * (V[i + 1] - V[i]) / dx
        for i in range(n):
            left = flux[i - 1] if i > 0 else 0.0
            right = flux[i] if i < n - 1 else 0.0
            un = U[i] + dt * U[i] * (1.0 - U[i] - d * V[i])
            vn = V[i] + dt * ((right - left) / dx + r * V[i] * (1.0 - V[i]))
            uc = min(max(un, 0.0), 1.0)
            vc = min(max(vn, 0.0), 1.0)
            clamped = max(clamped, abs(uc - un), abs(vc - vn))
            U[i] = uc
            V[i] = vc
        t += dt
    return clamped


def front_position(fields: FieldPair, grid: Grid1D, level: float = 0.5) -> float:
    """Rightmost point where V crosses ``level`` downwards, interpolated."""
    V = fields.V
    idx = np.nonzero((V[:-1] >= level) & (V[1:] < level))[0]
    if idx.size == 0:
        return np.nan
    i = int(idx[-1])
    x = grid.x
    return float(x[i] + (V[i] - level) / (V[i] - V[i + 1]) * grid.dx)


def run(
    initial: FieldPair,
    t_end: float,
    grid: Grid1D,
    params: ModelParams,
    safety: float = 0.9,
    frame_dt: float = 0.5,
    keep_frames: bool = False,
) -> RunResult:
    """Advance to ``t_end`` and measure the front speed.

    The front position is recorded every ``frame_dt``; the speed is the
    least-squares slope of position against time over the second half of
    the run.

    Raises
    ------
    FrontHitBoundary
        The front entered the outer 10% of the domain.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    span = grid.x_max - grid.x_min
    lo_edge = grid.x_min + BUFFER * span
    hi_edge = grid.x_max - BUFFER * span

    fields = initial
    ts, xs = [], []
    frames = []

    right_buffer = grid.x > hi_edge

    def record(f):
        pos = front_position(f, grid)
        # a front that overshot the buffer between frames has no crossing
        # left, but shows up as V >= 1/2 inside the right buffer
        if np.any(f.V[right_buffer] >= 0.5) or (
                np.isfinite(pos) and not lo_edge <= pos <= hi_edge):
            raise FrontHitBoundary(
                f"front at x = {pos:.6g} entered the boundary buffer at "
                f"t = {f.t:.6g}")
        ts.append(f.t)
        xs.append(pos)
        if keep_frames:
            frames.append(f)

    record(fields)
    n_frames = max(int(round(t_end / frame_dt)), 1)
    U = np.array(fields.U, dtype=float)
    V = np.array(fields.V, dtype=float)
    for k in range(1, n_frames + 1):
        t_next = t_end * k / n_frames
        clamped = _advance(U, V, fields.t, t_next, grid.dx, params.d,
                           params.r, safety)
        fields = FieldPair(U.copy(), V.copy(), t_next, clamped)
        record(fields)

    t = np.asarray(ts)
    x = np.asarray(xs)
    sel = (t >= 0.5 * t_end) & np.isfinite(x)
    if np.count_nonzero(sel) >= 2:
        speed = float(np.polyfit(t[sel], x[sel], 1)[0])
    else:
        speed = np.nan
    return RunResult(fields, speed, PositionSeries(t, x), frames)
