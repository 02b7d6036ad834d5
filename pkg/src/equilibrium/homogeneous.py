"""
Closed-form equilibria when every user shares one demand function.

Both equilibria give every user the same frequency x, found as the root of

    N lambda_a x + sqrt(c_t (mu_B - m lambda_a x) / g(x)) = mu_B

with m = N - 1 for the Nash equilibrium and m = 0 for the social one. The
left side is increasing on (0, x_up), equals sqrt(c_t mu_B / g(0+)) at 0 and
blows up at x_up, so a positive root exists iff g(0+) > c_t / mu_B.
"""

import logging
import math
from typing import Any, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..model.costs import DemandCurve, OffloadVector, demand_at_zero, demand_or_limit
from ..model.parameters import SystemConfig, UserProfile
from ..model.rootfind import Root, bisect_root
from .conditions import max_abs, selfish_condition_residuals, social_condition_residuals
from .results import EquilibriumKind, EquilibriumResult

logger = logging.getLogger(__name__)

BRACKET_GUARD = 1e-12


class HomogeneousScenario(BaseModel):
    """N identical users sharing one edge server; cfg.n_users must equal n_users."""

    model_config = ConfigDict(frozen=True)

    n_users: int = Field(ge=1)
    profile: UserProfile
    cfg: SystemConfig = Field(default_factory=SystemConfig)

    @model_validator(mode="before")
    @classmethod
    def _default_config_for_n(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("cfg") is None and "n_users" in data:
            data = {**data, "cfg": SystemConfig(n_users=data["n_users"])}
        return data

    @model_validator(mode="after")
    def _profile_feasible(self) -> "HomogeneousScenario":
        if self.cfg.n_users != self.n_users:
            raise ValueError(
                f"scenario has {self.n_users} users but its config says n_users={self.cfg.n_users}"
            )
        self.profile.check_stable(self.cfg)
        return self

    def users(self) -> List[UserProfile]:
        return [self.profile] * self.n_users


def existence_margin(s: HomogeneousScenario) -> float:
    """g(0+) - c_t / mu_B; positive iff non-trivial equilibria exist."""
    return demand_at_zero(s.profile, s.cfg) - s.profile.c_t / s.cfg.mu_B


def ne_exists(s: HomogeneousScenario) -> bool:
    """Whether a positive Nash (and social) equilibrium exists; equality counts as no."""
    return existence_margin(s) > 0


def _symmetric_root(s: HomogeneousScenario, coupled: int) -> Root:
    cfg, u, n = s.cfg, s.profile, s.n_users
    lam, mu_b = cfg.lambda_a, cfg.mu_B

    curve = DemandCurve(u, cfg)

    def phi(x: float) -> float:
        g = curve(x)
        if g <= 0:
            return math.inf
        return n * lam * x + math.sqrt(u.c_t * (mu_b - coupled * lam * x) / g)

    x_up = curve.root()
    hi = min(x_up - BRACKET_GUARD, mu_b / (n * lam) - BRACKET_GUARD)
    return bisect_root(lambda x: phi(x) - mu_b, 0.0, hi, label=f"symmetric equilibrium (m={coupled})")


def _solve(s: HomogeneousScenario, kind: EquilibriumKind) -> EquilibriumResult:
    users = s.users()
    if not ne_exists(s):
        logger.warning(
            f"{kind.value}: g(0+) <= c_t/mu_B (margin {existence_margin(s):.6g}); trivial equilibrium"
        )
        return EquilibriumResult(
            x_star=OffloadVector.zeros(s.n_users), kind=kind, trivial=True, residual=0.0
        )

    coupled = s.n_users - 1 if kind == EquilibriumKind.NE else 0
    root = _symmetric_root(s, coupled)
    xs = OffloadVector(np.full(s.n_users, root.value))
    if kind == EquilibriumKind.NE:
        residual = max_abs(selfish_condition_residuals(xs, users, s.cfg))
    else:
        residual = max_abs(social_condition_residuals(xs, users, s.cfg))

    logger.info(
        f"{kind.value} (N={s.n_users}): x = {root.value:.10f}, residual {residual:.2e}, "
        f"{root.iterations} bisection steps"
    )
    return EquilibriumResult(x_star=xs, kind=kind, residual=residual, iterations=root.iterations)


def solve_ne_homogeneous(s: HomogeneousScenario) -> EquilibriumResult:
    """Nash equilibrium of the unpriced selfish game."""
    return _solve(s, EquilibriumKind.NE)


def solve_se_homogeneous(s: HomogeneousScenario) -> EquilibriumResult:
    """Social equilibrium maximizing the sum of profits."""
    return _solve(s, EquilibriumKind.SE)


def optimal_price_homogeneous(s: HomogeneousScenario) -> float:
    """Unit price under which the selfish game's equilibrium is the social one."""
    se = solve_se_homogeneous(s)
    if se.trivial:
        return 0.0
    x_bar = se.x_star[0]
    g = demand_or_limit(x_bar, s.profile, s.cfg)
    return (s.n_users - 1) * s.cfg.lambda_a * x_bar * g / s.cfg.mu_B
