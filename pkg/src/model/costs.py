"""
Cost, utility, demand and profit of offloading.

A user retains a job with probability 1 - x and serves it in a local M/M/1
queue, or offloads it with probability x: airtime la_mua/beta(x) at transmit
power P_t, then a shared M/M/1 queue at the edge. The profit of offloading is
the cost saved against running everything locally; it splits into a utility
that depends only on the user's own x and a congestion cost from the shared
edge queue.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from .channel import threshold_from_frequency
from .exceptions import DomainError, InfeasibleError, OffloadingError
from .parameters import SystemConfig, UserProfile
from .rootfind import bisect_root

logger = logging.getLogger(__name__)

PROFIT_IDENTITY_RTOL = 1e-10
# Upper end of the demand-root bracket; the demand tends to -inf as x -> 1.
X_BRACKET_TOP = 1.0 - 1e-12


@dataclass
class OffloadVector:
    """Strategy profile x = (x_1, ..., x_N) of offloading frequencies."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        if self.x.size and (np.any(self.x < 0) or np.any(self.x > 1) or np.any(np.isnan(self.x))):
            raise DomainError("offloading frequencies must lie in [0, 1]")

    @classmethod
    def zeros(cls, n: int) -> "OffloadVector":
        return cls(np.zeros(n))

    def __len__(self) -> int:
        return self.x.size

    def __getitem__(self, k: int) -> float:
        return float(self.x[k])

    def edge_load(self, cfg: SystemConfig) -> float:
        """Total arrival rate at the edge, sum of lambda_a * x_k."""
        return cfg.lambda_a * float(self.x.sum())

    def is_stable(self, cfg: SystemConfig) -> bool:
        return self.edge_load(cfg) < cfg.mu_B

    def require_stable(self, cfg: SystemConfig) -> None:
        load = self.edge_load(cfg)
        if load >= cfg.mu_B:
            raise InfeasibleError(f"edge load {load:.6g} jobs/s reaches capacity {cfg.mu_B:.6g}")

    @property
    def mean(self) -> float:
        return float(self.x.mean()) if self.x.size else 0.0

    def to_list(self) -> List[float]:
        return [float(v) for v in self.x]


@dataclass
class CostBreakdown:
    """Per-user delays, energies and weighted costs at a strategy profile."""

    d_lc: float
    e_lc: float
    z_lc: float
    d_ec1: float
    e_ec: float
    d_ec2: float
    z_ec: float
    z_total: float
    utility: float
    congestion: float
    profit: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check_frequency(x: float) -> None:
    if x < 0 or x > 1 or math.isnan(x):
        raise DomainError(f"offloading frequency must lie in [0, 1], got {x}")


def _beta(x: float, u: UserProfile, cfg: SystemConfig) -> float:
    return threshold_from_frequency(x, u.snr(cfg), cfg.channel_model)


def _eta(u: UserProfile, cfg: SystemConfig) -> float:
    """Weighted airtime-plus-transmit-energy cost per unit of 1/beta."""
    return (u.c_t + u.c_e * cfg.P_t) * cfg.la_mua * cfg.airtime_scale


def local_cost(x: float, u: UserProfile, cfg: SystemConfig) -> Tuple[float, float, float]:
    """(sojourn, energy, weighted cost) of a locally executed job."""
    _check_frequency(x)
    mu_m = u.mu_m(cfg)
    denom = mu_m - cfg.lambda_a * (1.0 - x)
    if denom <= 0:
        raise InfeasibleError(
            f"local queue unstable: retained load {cfg.lambda_a * (1.0 - x):.6g} >= service rate {mu_m:.6g}"
        )
    d_lc = 1.0 / denom
    e_lc = u.local_energy(cfg)
    return d_lc, e_lc, u.c_e * e_lc + u.c_t * d_lc


def edge_cost(
    x: float, load_others: float, u: UserProfile, cfg: SystemConfig
) -> Tuple[float, float, float, float]:
    """(airtime, transmit energy, edge sojourn, weighted cost) of an offloaded job."""
    _check_frequency(x)
    if x == 0:
        raise DomainError("edge cost is undefined at x = 0 (infinite rate threshold)")
    denom = cfg.mu_B - load_others - cfg.lambda_a * x
    if denom <= 0:
        raise InfeasibleError(
            f"edge overloaded: load {load_others + cfg.lambda_a * x:.6g} >= capacity {cfg.mu_B:.6g}"
        )
    beta = _beta(x, u, cfg)
    d_ec1 = cfg.airtime_scale * cfg.la_mua / beta if beta > 0 else math.inf
    e_ec = cfg.P_t * d_ec1
    d_ec2 = 1.0 / denom
    return d_ec1, e_ec, d_ec2, u.c_e * e_ec + u.c_t * (d_ec1 + d_ec2)


def utility(x: float, u: UserProfile, cfg: SystemConfig) -> float:
    """Own-frequency part of the profit: local cost saved minus airtime and transmit cost."""
    _check_frequency(x)
    _, _, z_zero = local_cost(0.0, u, cfg)
    if x == 0:
        return 0.0
    _, _, z_lc = local_cost(x, u, cfg)
    if x == 1:
        return -math.inf
    return z_zero - (1.0 - x) * z_lc - x * _eta(u, cfg) / _beta(x, u, cfg)


def demand_at_zero(u: UserProfile, cfg: SystemConfig) -> float:
    """Limit of the demand function as x -> 0+."""
    mu_m = u.mu_m(cfg)
    if mu_m <= cfg.lambda_a:
        raise InfeasibleError(f"local service rate {mu_m:.6g} does not exceed arrival rate {cfg.lambda_a:.6g}")
    return u.c_e * u.local_energy(cfg) + u.c_t * mu_m / (mu_m - cfg.lambda_a) ** 2


class DemandCurve:
    """
    Demand function of one user with its constants resolved once.

    Calling the curve evaluates the demand extended to x = 0 by its right
    limit; `value` is the strict open-interval version.
    """

    def __init__(self, u: UserProfile, cfg: SystemConfig):
        self.at_zero = demand_at_zero(u, cfg)
        self.rho = u.snr(cfg)
        self.mu_m = u.mu_m(cfg)
        self.lambda_a = cfg.lambda_a
        self.c_t = u.c_t
        self.channel = cfg.channel_model
        self._energy = u.c_e * u.local_energy(cfg)
        self._eta = _eta(u, cfg)

    def value(self, x: float) -> float:
        if not 0 < x < 1:
            raise DomainError(f"demand is defined on (0, 1), got {x}")
        inv = self.channel.inverse_ccdf(x)
        scaled = 1.0 + self.rho * inv
        beta = math.log(scaled)
        beta_prime = self.rho * self.channel.inverse_ccdf_derivative(x) / scaled
        queue = self.mu_m - self.lambda_a * (1.0 - x)
        return (
            self._energy
            - self._eta / beta
            + self._eta * beta_prime * x / beta ** 2
            + self.c_t * self.mu_m / queue ** 2
        )

    def __call__(self, x: float) -> float:
        return self.at_zero if x == 0 else self.value(x)

    def root(self, offset: float = 0.0) -> float:
        """Unique x in (0, 1) with demand equal to `offset`; 0 when it never exceeds it."""
        if self.at_zero - offset <= 0:
            return 0.0
        return bisect_root(lambda x: self(x) - offset, 0.0, X_BRACKET_TOP, label="demand root").value


def demand(x: float, u: UserProfile, cfg: SystemConfig) -> float:
    """Marginal utility dU/dx on the open interval (0, 1); strictly decreasing."""
    if not 0 < x < 1:
        raise DomainError(f"demand is defined on (0, 1), got {x}")
    return DemandCurve(u, cfg).value(x)


def demand_or_limit(x: float, u: UserProfile, cfg: SystemConfig) -> float:
    """Demand extended to x = 0 by its right limit."""
    return demand_at_zero(u, cfg) if x == 0 else demand(x, u, cfg)


def demand_root(u: UserProfile, cfg: SystemConfig, offset: float = 0.0) -> float:
    """
    Unique x in (0, 1) where the demand equals `offset` (0 gives x_up).

    Returns 0 when the demand never exceeds `offset`, i.e. the user never
    benefits from offloading at that marginal charge.
    """
    return DemandCurve(u, cfg).root(offset)


def profit(
    k: int, xs: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig
) -> Tuple[float, float, float]:
    """
    (profit, utility, congestion) of user k.

    The profit is computed from the expected total cost and checked against
    utility minus congestion.
    """
    breakdown = cost_breakdown(k, xs, users, cfg)
    return breakdown.profit, breakdown.utility, breakdown.congestion


def cost_breakdown(
    k: int, xs: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig
) -> CostBreakdown:
    """All cost terms of user k at profile xs."""
    if len(xs) != len(users):
        raise DomainError(f"strategy vector has {len(xs)} entries for {len(users)} users")
    xs.require_stable(cfg)
    u = users[k]
    x = xs[k]

    _, _, z_zero = local_cost(0.0, u, cfg)
    d_lc, e_lc, z_lc = local_cost(x, u, cfg)

    if x == 0:
        return CostBreakdown(
            d_lc=d_lc, e_lc=e_lc, z_lc=z_lc,
            d_ec1=0.0, e_ec=0.0, d_ec2=0.0, z_ec=0.0,
            z_total=z_lc, utility=0.0, congestion=0.0, profit=0.0,
        )

    load_others = xs.edge_load(cfg) - cfg.lambda_a * x
    d_ec1, e_ec, d_ec2, z_ec = edge_cost(x, load_others, u, cfg)
    z_total = (1.0 - x) * z_lc + x * z_ec
    gross = z_zero - z_total

    u_k = utility(x, u, cfg)
    c_k = u.c_t * x * d_ec2
    split = u_k - c_k
    if abs(gross - split) > PROFIT_IDENTITY_RTOL * (1.0 + abs(gross)):
        raise OffloadingError(
            f"user {k}: profit {gross:.15g} disagrees with utility - congestion {split:.15g}"
        )

    return CostBreakdown(
        d_lc=d_lc, e_lc=e_lc, z_lc=z_lc,
        d_ec1=d_ec1, e_ec=e_ec, d_ec2=d_ec2, z_ec=z_ec,
        z_total=z_total, utility=u_k, congestion=c_k, profit=gross,
    )


def profits(xs: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig) -> np.ndarray:
    return np.array([profit(k, xs, users, cfg)[0] for k in range(len(users))])


def cost_breakdowns(
    xs: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig
) -> List[CostBreakdown]:
    return [cost_breakdown(k, xs, users, cfg) for k in range(len(users))]
