"""Desingularized first-order system, unstable-manifold seeding and integration.

After the change of variable ``dy/dxi = 1/(1 - U)`` the front equations
become the smooth system

    u' = -u (1 - u)(1 - u - d v) / c
    v' = w
    w' = -c w - r v (1 - u)(1 - v)

whose orbits leave the left state along its two-dimensional unstable
manifold.  One real parameter ``alpha`` labels the orbits on that manifold.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from . import _dopri
from .core import ModelParams, Regime, compute_rates

__all__ = [
    "State",
    "ToleranceSet",
    "EventKind",
    "TerminationEvent",
    "Trajectory",
    "StepFailure",
    "rhs",
    "seed_homogeneous",
    "seed_heterogeneous",
    "seed",
    "left_tail_xi",
    "integrate",
]


@dataclass(frozen=True)
class State:
    """Point (u, v, w) of the desingularized phase space.

    ``one_minus_v`` optionally carries 1 - v to full relative precision;
    seeds set it because 1 - v can be far below machine epsilon there.
    """

    u: float
    v: float
    w: float
    one_minus_v: float | None = field(default=None, compare=False, repr=False)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w], dtype=float)

    @classmethod
    def from_array(cls, a) -> "State":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def in_region(self, slack: float = 0.0) -> bool:
        """Membership in 0 < u < 1, 0 < v < 1, w < 0 up to ``slack``."""
        return (
            -slack < self.u < 1.0 + slack
            and -slack < self.v < 1.0 + slack
            and self.w < slack
        )


@dataclass(frozen=True)
class ToleranceSet:
    """Integrator and seeding tolerances.

    u is integrated in logit form and v through 1 - v, with relative error
    control for v near both 0 and 1.  ``atol`` is only a floor: it has to
    stay far below ``rtol * eps_seed`` so that the seeded perturbations are
    resolved in relative terms.
    """

    rtol: float = 1e-9
    atol: float = 1e-20
    event: float = 1e-10
    min_step: float = 1e-12
    eps_seed: float = 1e-8
    max_steps: int = 5_000_000

    def __post_init__(self) -> None:
        for name in ("rtol", "atol", "event", "min_step", "eps_seed"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive, got {val!r}")
        if self.eps_seed > 1e-6:
            raise ValueError("eps_seed must not exceed 1e-6")

    def scaled(self, factor: float) -> "ToleranceSet":
        """Copy with rtol and atol multiplied by ``factor``."""
        return ToleranceSet(
            rtol=self.rtol * factor,
            atol=self.atol * factor,
            event=self.event,
            min_step=self.min_step,
            eps_seed=self.eps_seed,
            max_steps=self.max_steps,
        )


class EventKind(enum.Enum):
    V_CROSSED_ZERO = "VCrossedZero"
    U_TURNED = "UTurned"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    STEP_FAILURE = "StepFailure"
    # u -> 1 with v bounded away from 0 is certain (see _dopri.high_certificate)
    HIGH_CERTIFIED = "HighCertified"


_CODE_TO_KIND = {
    _dopri.BUDGET: EventKind.BUDGET_EXHAUSTED,
    _dopri.V_ZERO: EventKind.V_CROSSED_ZERO,
    _dopri.U_TURN: EventKind.U_TURNED,
    _dopri.STEP_FAIL: EventKind.STEP_FAILURE,
    _dopri.MAX_STEPS: EventKind.STEP_FAILURE,
    _dopri.HIGH_CERT: EventKind.HIGH_CERTIFIED,
}


@dataclass(frozen=True)
class TerminationEvent:
    kind: EventKind
    y: float | None = None

    def __str__(self) -> str:
        if self.y is None:
            return self.kind.value
        return f"{self.kind.value}({self.y:.12g})"


class StepFailure(RuntimeError):
    """Step size fell below ``min_step`` (or the step budget ran out)."""

    def __init__(self, y: float, trajectory: "Trajectory | None" = None):
        super().__init__(f"integration stalled at y = {y:.6g}")
        self.y = y
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded solution of the desingularized system.

    Attributes
    ----------
    y : ndarray, shape (n,)
        Strictly increasing sample abscissae; ``y[0] == y_start`` and
        ``y[-1] == y_end``.
    raw : ndarray, shape (n, 4)
        Integrated variables: logit of u, 1 - v, w and the comoving
        coordinate xi (dxi/dy = 1 - u) including its analytic left-tail
        offset.
    dense : ndarray, shape (n - 1, 16)
        Quartic interpolant of every step (see :meth:`evaluate`).
    termination : TerminationEvent
    params : ModelParams
    alpha : float
        Shooting parameter used for the seed.
    y_uturn : float or None
        Location of the first downward crossing of u + d v = 1, when seen.
    """

    y: np.ndarray
    raw: np.ndarray
    dense: np.ndarray
    termination: TerminationEvent
    params: ModelParams
    alpha: float = float("nan")
    y_uturn: float | None = None
    n_steps: int = 0

    @property
    def y_start(self) -> float:
        return float(self.y[0])

    @property
    def y_end(self) -> float:
        return float(self.y[-1])

    @property
    def z(self) -> np.ndarray:
        return self.raw[:, 0]

    @property
    def u(self) -> np.ndarray:
        return expit(self.raw[:, 0])

    @property
    def one_minus_u(self) -> np.ndarray:
        return expit(-self.raw[:, 0])

    @property
    def v(self) -> np.ndarray:
        return 1.0 - self.raw[:, 1]

    @property
    def one_minus_v(self) -> np.ndarray:
        return self.raw[:, 1]

    @property
    def w(self) -> np.ndarray:
        return self.raw[:, 2]

    @property
    def xi(self) -> np.ndarray:
        return self.raw[:, 3]

    @property
    def states(self) -> np.ndarray:
        """Columns u, v, w."""
        return np.column_stack([self.u, self.v, self.w])

    @property
    def final_state(self) -> State:
        return State(float(expit(self.raw[-1, 0])), 1.0 - float(self.raw[-1, 1]),
                     float(self.raw[-1, 2]))

    @property
    def samples(self) -> list[tuple[float, State]]:
        return [(float(y), State.from_array(s)) for y, s in zip(self.y, self.states)]

    def __len__(self) -> int:
        return self.y.shape[0]

    def evaluate_raw(self, yq) -> np.ndarray:
        """Interpolated (z, 1 - v, w, xi) at ``yq``; NaN outside the range."""
        yq = np.asarray(yq, dtype=float)
        flat = yq.ravel()
        out = np.full((flat.size, 4), np.nan)
        if len(self) == 1:
            out[flat == self.y[0]] = self.raw[0]
            return out.reshape(yq.shape + (4,))
        inside = (flat >= self.y[0]) & (flat <= self.y[-1])
        q = flat[inside]
        k = np.clip(np.searchsorted(self.y, q, side="right") - 1, 0, len(self) - 2)
        th = (q - self.y[k]) / (self.y[k + 1] - self.y[k])
        powers = np.stack([th, th**2, th**3, th**4], axis=-1)
        D = self.dense[k].reshape(-1, 4, 4)
        out[inside] = self.raw[k] + np.einsum("nij,nj->ni", D, powers)
        return out.reshape(yq.shape + (4,))

    def evaluate(self, yq) -> np.ndarray:
        """Interpolated (u, v, w) at ``yq`` with shape (..., 3)."""
        raw = self.evaluate_raw(yq)
        out = raw[..., :3].copy()
        out[..., 0] = expit(raw[..., 0])
        out[..., 1] = 1.0 - raw[..., 1]
        return out


def rhs(state, params: ModelParams) -> tuple[float, float, float]:
    """Vector field of the desingularized system at ``state``."""
    if isinstance(state, State):
        u, v, w = state.u, state.v, state.w
    else:
        u, v, w = state
    d, r, c = params.d, params.r, params.c
    return (-u * (1.0 - u) * (1.0 - u - d * v) / c, w,
            -c * w - r * v * (1.0 - u) * (1.0 - v))


def seed_homogeneous(alpha: float, params: ModelParams,
                     eps_seed: float = 1e-8) -> tuple[float, State]:
    """Point on the unstable manifold of (0, 1, 0) for d > 1.

    ``y_start`` is the largest y for which both ``alpha e^{mu y}`` and
    ``e^{lam y}`` are at most ``eps_seed``.
    """
    if params.regime is not Regime.HOMOGENEOUS:
        raise ValueError("seed_homogeneous requires d > 1")
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    _check_eps(eps_seed)
    rates = compute_rates(params)
    lam, mu = rates.lam, rates.mu
    y0 = min(math.log(eps_seed / alpha) / mu, math.log(eps_seed) / lam)
    el = math.exp(lam * y0)
    return y0, State(alpha * math.exp(mu * y0), 1.0 - el, -lam * el, el)


def _het_u_correction(y: float, alpha: float, lam: float, mu: float, d: float,
                      degenerate: bool) -> float:
    em = math.exp(mu * y)
    if degenerate:
        return (alpha - d * mu * y) * em
    return alpha * em + d * mu / (mu - lam) * (math.exp(lam * y) - em)


def seed_heterogeneous(alpha: float, params: ModelParams,
                       eps_seed: float = 1e-8) -> tuple[float, State]:
    """Point on the unstable manifold of (1 - d, 1, 0) for d < 1.

    Any real ``alpha`` is allowed.  ``y_start`` is chosen so that the
    largest of the corrections to the left state (the u-correction and
    ``e^{lam y}``) equals ``eps_seed``.
    """
    if params.regime is not Regime.HETEROGENEOUS:
        raise ValueError("seed_heterogeneous requires d < 1")
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha!r}")
    _check_eps(eps_seed)
    rates = compute_rates(params)
    lam, mu, d = rates.lam, rates.mu, params.d
    deg = rates.degenerate

    def log_size(y: float) -> float:
        corr = abs(_het_u_correction(y, alpha, lam, mu, d, deg))
        return max(math.log(corr) if corr > 0 else -math.inf, lam * y)

    target = math.log(eps_seed)
    y0 = target / lam
    if alpha != 0.0:
        y0 = min(y0, (target - math.log(abs(alpha))) / mu)
    # the u-correction can exceed its separate terms (near-degenerate rates);
    # walk left until it fits, then refine on the last bracket
    step = 1.0 / min(lam, mu)
    if log_size(y0) > target:
        hi = y0
        y0 -= step
        while log_size(y0) > target:
            hi = y0
            y0 -= step
        y0 = brentq(lambda y: log_size(y) - target, y0, hi, xtol=1e-13)
        if log_size(y0) > target:
            y0 -= 1e-12
    u = 1.0 - d + _het_u_correction(y0, alpha, lam, mu, d, deg)
    el = math.exp(lam * y0)
    return y0, State(u, 1.0 - el, -lam * el, el)


def seed(alpha: float, params: ModelParams,
         eps_seed: float = 1e-8) -> tuple[float, State]:
    """Regime-appropriate seed."""
    if params.regime is Regime.HOMOGENEOUS:
        return seed_homogeneous(alpha, params, eps_seed)
    return seed_heterogeneous(alpha, params, eps_seed)


def _check_eps(eps_seed: float) -> None:
    if not (0.0 < eps_seed <= 1e-6):
        raise ValueError(f"eps_seed must lie in (0, 1e-6], got {eps_seed!r}")


def left_tail_xi(alpha: float, params: ModelParams, y: float) -> float:
    """Comoving coordinate of the seed at ``y`` from the leading-order tail.

    Homogeneous: xi = y - alpha e^{mu y}/mu.  Heterogeneous:
    xi = d y - integral of (u - (1 - d)) from -infinity to y, evaluated on
    the exponential seed terms (with the y e^{mu y} term when the two rates
    coincide).
    """
    rates = compute_rates(params)
    lam, mu, d = rates.lam, rates.mu, params.d
    em = math.exp(mu * y)
    if params.regime is Regime.HOMOGENEOUS:
        return y - alpha * em / mu
    if rates.degenerate:
        tail = alpha * em / mu - d * (y - 1.0 / mu) * em
    else:
        tail = alpha * em / mu + d * mu / (mu - lam) * (
            math.exp(lam * y) / lam - em / mu)
    return d * y - tail


ARM_GAP = 1e-6


def integrate(
    seed_point: tuple[float, State],
    params: ModelParams,
    y_max: float,
    tol: ToleranceSet | None = None,
    *,
    stop_on_uturn: bool = True,
    high_certificate: bool = False,
    record: bool = True,
    raise_on_failure: bool = True,
    alpha: float = float("nan"),
    xi_start: float | None = None,
    allow_stiff: bool = True,
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration from a seed up to ``y_max``.

    Parameters
    ----------
    seed_point : (y_start, State)
    params : ModelParams
    y_max : float
        Absolute end of the integration interval.
    tol : ToleranceSet, optional
    stop_on_uturn : bool
        Terminate at the first downward crossing of u + d v = 1.  When
        False the crossing is only recorded and the run continues.
    high_certificate : bool
        Terminate as soon as convergence to u = 1 with positive v is certain.
    record : bool
        Keep every accepted step; otherwise only the endpoints.
    raise_on_failure : bool
        Raise :class:`StepFailure` instead of returning a trajectory that
        ends in a StepFailure event.
    alpha : float
        Seed parameter; when finite it also fixes the default ``xi_start``.
    xi_start : float, optional
        Comoving coordinate at ``y_start``.  Defaults to the analytic tail
        value for ``alpha`` or to ``y_start`` without one.
    allow_stiff : bool
        Let the kernel hand the far tail over to its implicit stepper.
    """
    tol = tol or ToleranceSet()
    y0, s0 = seed_point
    y0 = float(y0)
    if not y_max > y0:
        raise ValueError("y_max must exceed y_start")
    if not isinstance(s0, State):
        s0 = State.from_array(s0)
    if xi_start is None:
        xi_start = left_tail_xi(alpha, params, y0) if math.isfinite(alpha) else y0
    with np.errstate(divide="ignore"):
        z0 = float(logit(s0.u))
    q0 = 1.0 - s0.v if s0.one_minus_v is None else s0.one_minus_v
    s_init = np.array([z0, q0, s0.w, xi_start], dtype=float)
    code, y_stop, s_stop, ys, raw, dense, y_uturn, n_steps = \
        _dopri.integrate_kernel(
            y0, s_init, float(y_max), params.d, params.r, params.c,
            tol.rtol, tol.atol, tol.min_step, tol.event, ARM_GAP,
            stop_on_uturn, high_certificate, record, tol.max_steps,
            allow_stiff,
        )
    kind = _CODE_TO_KIND[int(code)]
    if not record:
        if y_stop > y0:
            ys, raw = np.array([y0, y_stop]), np.vstack([s_init, s_stop])
        else:
            ys, raw = np.array([y0]), s_init[None, :]
        dense = np.full((len(ys) - 1, 16), np.nan)
    ev_y = None if kind is EventKind.BUDGET_EXHAUSTED else float(y_stop)
    traj = Trajectory(
        y=ys,
        raw=raw,
        dense=dense,
        termination=TerminationEvent(kind, ev_y),
        params=params,
        alpha=float(alpha),
        y_uturn=None if math.isnan(y_uturn) else float(y_uturn),
        n_steps=int(n_steps),
    )
    if kind is EventKind.STEP_FAILURE and raise_on_failure:
        raise StepFailure(float(y_stop), traj)
    return traj
