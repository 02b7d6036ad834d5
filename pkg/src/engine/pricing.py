"""
Congestion prices that steer selfish users to the social equilibrium.

A user offloading at x_k imposes extra edge delay on everybody else. Charging
that externality per unit of offloading frequency turns the selfish first-order
condition into the social one.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from ..equilibrium.results import EquilibriumResult
from ..model.costs import OffloadVector
from ..model.exceptions import DomainError
from ..model.parameters import SystemConfig, UserProfile
from .best_response import DEFAULT_MAX_SWEEPS, RegulatedSelfish, SocialIteration, run_gauss_seidel

logger = logging.getLogger(__name__)


def uniform_price(se_vector: OffloadVector, cfg: SystemConfig, c_t: float) -> float:
    """c_t * L / (mu_B - L)^2 with L the total edge load at the social equilibrium."""
    if c_t <= 0:
        raise DomainError(f"delay weight must be positive, got {c_t}")
    se_vector.require_stable(cfg)
    load = se_vector.edge_load(cfg)
    return c_t * load / (cfg.mu_B - load) ** 2


def personalized_prices(
    se_vector: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig
) -> List[float]:
    """Exact externality of each user: c_t,k * (load of the others) / (mu_B - L)^2."""
    if len(se_vector) != len(users):
        raise DomainError(f"strategy vector has {len(se_vector)} entries for {len(users)} users")
    se_vector.require_stable(cfg)
    load = se_vector.edge_load(cfg)
    y2 = (cfg.mu_B - load) ** 2
    return [u.c_t * (load - cfg.lambda_a * se_vector[k]) / y2 for k, u in enumerate(users)]


@dataclass
class PricedOutcome:
    """Social iteration, the price derived from it, and the priced selfish run."""

    social: EquilibriumResult
    regulated: EquilibriumResult
    price: Any

    @property
    def max_gap(self) -> float:
        return float(abs(self.social.x_star.x - self.regulated.x_star.x).max())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "price": self.price,
            "max_gap": self.max_gap,
            "social": self.social.to_dict(),
            "regulated": self.regulated.to_dict(),
        }


def solve_priced_equilibrium(
    users: Sequence[UserProfile],
    cfg: SystemConfig,
    x0: Optional[OffloadVector] = None,
    exact: bool = False,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> PricedOutcome:
    """Run the social iteration, price its limit, then run the regulated game."""
    social = run_gauss_seidel(users, cfg, SocialIteration(), x0=x0, max_sweeps=max_sweeps)
    if exact:
        price: Any = personalized_prices(social.x_star, users, cfg)
    else:
        # shared delay weight; users in a scenario carry the same c_t
        price = uniform_price(social.x_star, cfg, users[0].c_t)
    regulated = run_gauss_seidel(users, cfg, RegulatedSelfish(price), x0=x0, max_sweeps=max_sweeps)
    outcome = PricedOutcome(social=social, regulated=regulated, price=price)
    logger.info(
        f"priced run ({'per-user' if exact else 'uniform'} price): social {social.sweeps} sweeps, "
        f"regulated {regulated.sweeps} sweeps, max gap {outcome.max_gap:.2e}"
    )
    return outcome
