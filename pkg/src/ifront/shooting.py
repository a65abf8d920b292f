"""Shot classification and bisection for the critical shooting parameter.

Every orbit leaving the left state either stops being admissible (v hits
zero, or u + d v drops below one after which u can only decrease), or it
converges to some (1, v_inf, 0).  Both sets of ``alpha`` are intervals and
the front is the orbit at their common endpoint.

High shots are recognised by a certificate rather than by waiting: close to
the critical parameter a shot shadows the front for a very long stretch of
y (the front approaches its end state only like 1/y), so a fixed horizon
would bias the bisection.  See ``_dopri.high_certificate``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .core import ModelParams, Regime
from .desing import (
    EventKind,
    State,
    TerminationEvent,
    ToleranceSet,
    Trajectory,
    integrate,
    seed,
)

__all__ = [
    "ShotLabel",
    "ShotClass",
    "ShootingResult",
    "Inconclusive",
    "BracketNotFound",
    "classify_shot",
    "find_alpha1",
    "front_in_y",
    "default_y_max",
    "terminal_v_bound",
]

EPS_U = 1e-4
# horizon for classification shots; in practice shots end by an event or
# by the certificate long before it
CLASSIFY_Y_MAX = 1e10
DEFAULT_ALPHA_TOL = 1e-8
# bracket expansion range: alpha = 2^k
K_MIN = -60
K_MAX = 1020


class ShotLabel(enum.Enum):
    LOW = "Low"
    HIGH = "High"


@dataclass(frozen=True)
class ShotClass:
    label: ShotLabel
    termination: TerminationEvent
    final_state: State
    alpha: float

    @property
    def is_high(self) -> bool:
        return self.label is ShotLabel.HIGH


@dataclass(frozen=True)
class ShootingResult:
    alpha1: float
    bracket: tuple[float, float]
    trajectory: Trajectory
    n_shots: int
    regime: Regime
    history: list[ShotClass] = field(default_factory=list, repr=False)

    @property
    def bracket_width(self) -> float:
        """Bracket width relative to the bracket magnitude."""
        lo, hi = self.bracket
        return (hi - lo) / _alpha_scale(lo, hi, self.regime)


class Inconclusive(RuntimeError):
    def __init__(self, alpha: float, y_max: float):
        super().__init__(
            f"shot alpha={alpha!r} neither terminated nor converged by "
            f"y={y_max!r}; enlarge y_max"
        )
        self.alpha = alpha
        self.y_max = y_max


class BracketNotFound(RuntimeError):
    pass


def default_y_max(c: float) -> float:
    return max(200.0, 50.0 / c)


def terminal_v_bound(params: ModelParams, y_max: float) -> float:
    """Size of v at y_max on the front's algebraic tail, c(1+r)/(d r y)."""
    d, r, c = params.d, params.r, params.c
    return c * (1.0 + r) / (d * r * y_max)


def classify_shot(
    alpha: float,
    params: ModelParams,
    y_max: float | None = None,
    tol: ToleranceSet | None = None,
    eps_u: float = EPS_U,
) -> ShotClass:
    """Integrate one shot and decide on which side of the front it lies.

    Low when v crosses zero or u + d v - 1 changes sign downward (u then
    decreases for good).  High when the convergence certificate holds, or,
    failing that, when u >= 1 - eps_u with v > 0 at ``y_max``.

    Raises
    ------
    Inconclusive
        The horizon ``y_max`` (default 1e10) was reached without a decision.
    StepFailure
        Propagated from the integrator.
    """
    tol = tol or ToleranceSet()
    if params.regime is Regime.HOMOGENEOUS and not alpha > 0:
        raise ValueError("alpha must be positive in the homogeneous regime")
    y_max = CLASSIFY_Y_MAX if y_max is None else y_max
    sp = seed(alpha, params, tol.eps_seed)
    traj = integrate(sp, params, max(y_max, sp[0] + 1.0), tol,
                     high_certificate=True, record=False, alpha=alpha)
    ev = traj.termination
    final = traj.final_state
    if ev.kind in (EventKind.V_CROSSED_ZERO, EventKind.U_TURNED):
        label = ShotLabel.LOW
    elif ev.kind is EventKind.HIGH_CERTIFIED:
        label = ShotLabel.HIGH
    elif final.u >= 1.0 - eps_u and final.v > 0.0:
        label = ShotLabel.HIGH
    else:
        raise Inconclusive(alpha, y_max)
    return ShotClass(label, ev, final, float(alpha))


def _alpha_scale(lo: float, hi: float, regime: Regime) -> float:
    return max(abs(lo), abs(hi))


def _bracket(params, tol, classify, history):
    """Geometric expansion of the search for a Low/High pair."""
    def shot(a):
        sc = classify(a)
        history.append(sc)
        return sc.is_high

    if params.regime is Regime.HOMOGENEOUS:
        if shot(1.0):
            hi = 1.0
            for k in range(-1, K_MIN - 1, -1):
                a = 2.0**k
                if not shot(a):
                    return a, hi
                hi = a
        else:
            lo = 1.0
            for k in range(1, K_MAX + 1):
                a = 2.0**k
                if shot(a):
                    return lo, a
                lo = a
        raise BracketNotFound(
            f"no sign change for alpha in [2^{K_MIN}, 2^{K_MAX}] at {params}")

    # heterogeneous: any real alpha
    if shot(0.0):
        hi = 0.0
        for k in range(K_MIN, K_MAX + 1):
            a = -(2.0**k)
            if not shot(a):
                return a, hi
            hi = a
    else:
        lo = 0.0
        for k in range(K_MIN, K_MAX + 1):
            a = 2.0**k
            if shot(a):
                return lo, a
            lo = a
    raise BracketNotFound(f"no sign change for |alpha| <= 2^{K_MAX} at {params}")


def find_alpha1(
    params: ModelParams,
    alpha_tol: float = DEFAULT_ALPHA_TOL,
    y_max: float | None = None,
    tol: ToleranceSet | None = None,
    classify_y_max: float | None = None,
) -> ShootingResult:
    """Bracket and bisect the shooting parameter of the front.

    Parameters
    ----------
    params : ModelParams
    alpha_tol : float
        Target bracket width relative to ``max(|alpha_low|, |alpha_high|)``.
        Bisection also stops when the bracket cannot be split in floating
        point (a critical value of exactly zero).
    y_max : float, optional
        End of the returned trajectory, default ``max(200, 50/c)``.
    tol : ToleranceSet, optional
    classify_y_max : float, optional
        Horizon of each classification shot.

    Returns
    -------
    ShootingResult
        ``alpha1`` is the High end of the final bracket and ``trajectory``
        the orbit launched from it, integrated up to ``y_max``.
    """
    if not alpha_tol > 0:
        raise ValueError("alpha_tol must be positive")
    tol = tol or ToleranceSet()
    y_max = default_y_max(params.c) if y_max is None else float(y_max)
    history: list[ShotClass] = []

    def classify(a):
        return classify_shot(a, params, classify_y_max, tol)

    lo, hi = _bracket(params, tol, classify, history)
    regime = params.regime
    while (hi - lo) > alpha_tol * _alpha_scale(lo, hi, regime):
        if lo > 0 and hi / lo > 2.0:
            mid = math.sqrt(lo * hi)
        else:
            mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        sc = classify(mid)
        history.append(sc)
        if sc.is_high:
            hi = mid
        else:
            lo = mid

    sp = seed(hi, params, tol.eps_seed)
    traj = integrate(sp, params, max(y_max, sp[0] + 1.0), tol,
                     stop_on_uturn=True, alpha=hi)
    return ShootingResult(
        alpha1=hi,
        bracket=(lo, hi),
        trajectory=traj,
        n_shots=len(history),
        regime=regime,
        history=history,
    )


def front_in_y(
    params: ModelParams,
    alpha_tol: float = DEFAULT_ALPHA_TOL,
    y_max: float | None = None,
    tol: ToleranceSet | None = None,
) -> Trajectory:
    """The High-side orbit at the converged bracket, up to ``y_max``."""
    return find_alpha1(params, alpha_tol, y_max, tol).trajectory
