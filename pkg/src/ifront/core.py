"""Model parameters, linearization rates and equilibria of the reduced system.

The reduced acid-mediated model reads

    U_t = U (1 - U - d V)
    V_t = ((1 - U) V_x)_x + r V (1 - V)

and a traveling front moves with speed ``c`` in the comoving variable
``xi = x - c t``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Regime(enum.Enum):
    """Which invasion front is sought: d > 1 or d < 1."""

    HOMOGENEOUS = "homogeneous"
    HETEROGENEOUS = "heterogeneous"


class EquilibriumKind(enum.Enum):
    UNSTABLE_NODE = "unstable node"
    SADDLE = "saddle"
    STABLE_NODE = "stable node"


# Relative gap below which lambda and mu are treated as equal.
DEGENERATE_RTOL = 1e-6


def _check_dr(d: float, r: float) -> None:
    if not (d > 0.0 and math.isfinite(d)):
        raise ValueError(f"d must be positive and finite, got {d!r}")
    if d == 1.0:
        raise ValueError("d = 1 is non-generic and not supported")
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"r must be positive and finite, got {r!r}")


@dataclass(frozen=True)
class ModelParams:
    """Competition coefficient ``d``, tumor growth rate ``r`` and speed ``c``."""

    d: float
    r: float
    c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "c", float(self.c))
        _check_dr(self.d, self.r)
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise ValueError(f"c must be positive and finite, got {self.c!r}")

    @property
    def regime(self) -> Regime:
        return Regime.HOMOGENEOUS if self.d > 1.0 else Regime.HETEROGENEOUS

    @property
    def left_state(self) -> tuple[float, float]:
        """(U, V) at xi -> -infinity."""
        if self.regime is Regime.HOMOGENEOUS:
            return (0.0, 1.0)
        return (1.0 - self.d, 1.0)

    @property
    def right_state(self) -> tuple[float, float]:
        return (1.0, 0.0)

    def with_speed(self, c: float) -> "ModelParams":
        return ModelParams(self.d, self.r, c)


@dataclass(frozen=True)
class Rates:
    """Exponents of the linearized dynamics for one parameter set.

    ``lam`` and ``mu`` are the two unstable eigenvalues at the left state of
    the desingularized system (decay of 1 - v and growth of the u-perturbation
    as y -> -inf), ``zeta`` the stable one, ``gamma = r/c`` the exponential
    rate of the physical tail at xi -> +inf and ``delta`` the square root
    appearing in ``lam``.
    """

    lam: float
    mu: float
    gamma: float
    eta: float
    zeta: float
    delta: float
    degenerate: bool

    # ``lambda`` is a Python keyword
    @property
    def lambda_(self) -> float:
        return self.lam


def compute_rates(params: ModelParams) -> Rates:
    d, r, c = params.d, params.r, params.c
    if params.regime is Regime.HOMOGENEOUS:
        k = r
        mu = (d - 1.0) / c
    else:
        k = d * r
        mu = d * (1.0 - d) / c
    delta = math.sqrt(c * c + 4.0 * k)
    # (delta - c)/2 without cancellation for c >> sqrt(k)
    lam = 2.0 * k / (delta + c)
    zeta = -0.5 * (c + delta)
    degenerate = (
        params.regime is Regime.HETEROGENEOUS
        and abs(lam - mu) < DEGENERATE_RTOL * max(lam, mu)
    )
    return Rates(
        lam=lam,
        mu=mu,
        gamma=r / c,
        eta=min(lam, mu),
        zeta=zeta,
        delta=delta,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class EquilibriumReport:
    point: tuple[float, float]
    kind: EquilibriumKind
    eigenvalues: tuple[float, float]


def jacobian(point: tuple[float, float], d: float, r: float) -> np.ndarray:
    """Jacobian of the reaction terms (U(1-U-dV), rV(1-V)) at ``point``."""
    U, V = point
    return np.array(
        [[1.0 - 2.0 * U - d * V, -d * U], [0.0, r * (1.0 - 2.0 * V)]]
    )


def _kind(eigs: tuple[float, float]) -> EquilibriumKind:
    a, b = eigs
    if a > 0 and b > 0:
        return EquilibriumKind.UNSTABLE_NODE
    if a < 0 and b < 0:
        return EquilibriumKind.STABLE_NODE
    return EquilibriumKind.SADDLE


def classify_equilibria(d: float, r: float) -> list[EquilibriumReport]:
    """The four uniform equilibria (0,0), (1,0), (0,1), (1-d,1).

    The Jacobian is upper triangular, so its eigenvalues are read off the
    diagonal: {1, r}, {-1, r}, {1-d, -r}, {d-1, -r}.
    """
    _check_dr(d, r)
    points = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0 - d, 1.0)]
    out = []
    for p in points:
        J = jacobian(p, d, r)
        eigs = (float(J[0, 0]), float(J[1, 1]))
        out.append(EquilibriumReport(point=p, kind=_kind(eigs), eigenvalues=eigs))
    return out
