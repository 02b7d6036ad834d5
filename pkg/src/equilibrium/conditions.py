"""
First-order equilibrium conditions, evaluated as residuals.

For user k with residual edge capacity y = mu_B - sum_j lambda_a x_j:

* selfish (optionally priced): g_k(x_k) - P_k = c_t (y + lambda_a x_k) / y^2
* social:                     g_k(x_k)       = c_t mu_B / y^2

At x_k = 0 the condition is the corner inequality "marginal profit <= 0",
so only a positive left-hand excess counts as a residual there.
"""

from typing import Sequence, Union

import numpy as np

from ..model.costs import OffloadVector, demand, demand_at_zero
from ..model.exceptions import InfeasibleError
from ..model.parameters import SystemConfig, UserProfile
from .results import price_for


def _residual_capacity(xs: OffloadVector, cfg: SystemConfig) -> float:
    y = cfg.mu_B - xs.edge_load(cfg)
    if y <= 0:
        raise InfeasibleError(f"edge load reaches capacity (residual {y:.6g})")
    return y


def _residual(x: float, lhs_at_zero: float, lhs: float, rhs: float) -> float:
    if x == 0:
        return max(0.0, lhs_at_zero - rhs)
    return lhs - rhs


def selfish_condition_residuals(
    xs: OffloadVector,
    users: Sequence[UserProfile],
    cfg: SystemConfig,
    price: Union[float, Sequence[float]] = 0.0,
) -> np.ndarray:
    y = _residual_capacity(xs, cfg)
    out = np.empty(len(users))
    for k, u in enumerate(users):
        x = xs[k]
        p = price_for(price, k)
        rhs = u.c_t * (y + cfg.lambda_a * x) / y ** 2
        lhs = demand(x, u, cfg) - p if x > 0 else 0.0
        out[k] = _residual(x, demand_at_zero(u, cfg) - p, lhs, rhs)
    return out


def social_condition_residuals(
    xs: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig
) -> np.ndarray:
    y = _residual_capacity(xs, cfg)
    out = np.empty(len(users))
    for k, u in enumerate(users):
        x = xs[k]
        rhs = u.c_t * cfg.mu_B / y ** 2
        lhs = demand(x, u, cfg) if x > 0 else 0.0
        out[k] = _residual(x, demand_at_zero(u, cfg), lhs, rhs)
    return out


def max_abs(residuals: np.ndarray) -> float:
    return float(np.max(np.abs(residuals))) if residuals.size else 0.0
