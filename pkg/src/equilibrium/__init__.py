"""Equilibrium definitions, conditions and closed-form solvers."""

from .conditions import selfish_condition_residuals, social_condition_residuals
from .homogeneous import (
    HomogeneousScenario,
    existence_margin,
    ne_exists,
    optimal_price_homogeneous,
    solve_ne_homogeneous,
    solve_se_homogeneous,
)
from .results import EquilibriumKind, EquilibriumResult, TraceRow
