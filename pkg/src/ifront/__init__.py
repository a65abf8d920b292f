"""Traveling invasion fronts of a degenerate acid-mediated tumor model."""
from .core import (
    EquilibriumKind,
    EquilibriumReport,
    ModelParams,
    Rates,
    Regime,
    classify_equilibria,
    compute_rates,
)

__version__ = "0.1.0"

__all__ = [
    "EquilibriumKind",
    "EquilibriumReport",
    "ModelParams",
    "Rates",
    "Regime",
    "classify_equilibria",
    "compute_rates",
]
