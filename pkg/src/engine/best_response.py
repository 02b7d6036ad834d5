"""
Decentralized best-response iteration for the regulated-selfish and social games.

Given the residual capacity b = mu_B - sum_{j != k} lambda_a x_j left by the
others, user k picks the x solving F(x) = b, where F is increasing on
(0, cap) and cap is the root of its (net) demand:

* regulated selfish, net demand h = g - P:
  F_N(x) = lambda_a x + c_t/(2h) + sqrt((c_t/(2h))^2 + c_t lambda_a x / h)
* social:
  F_S(x) = lambda_a x + sqrt(c_t mu_B / g)

When b <= F(0+) there is no interior solution and the profit-maximizing
choice is the corner x = 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ..equilibrium.conditions import max_abs, selfish_condition_residuals, social_condition_residuals
from ..equilibrium.results import EquilibriumKind, EquilibriumResult, TraceRow, price_for
from ..model.costs import DemandCurve, OffloadVector
from ..model.exceptions import DomainError, InfeasibleError, NonConvergenceError, SolverError
from ..model.parameters import SystemConfig, UserProfile
from ..model.rootfind import bisect_root

logger = logging.getLogger(__name__)

DEFAULT_MAX_SWEEPS = 10_000
CAP_GUARD = 1e-12


@dataclass(frozen=True)
class RegulatedSelfish:
    """Selfish users paying `price` per unit of offloading frequency (scalar or per user)."""

    price: Union[float, Sequence[float]] = 0.0

    def __post_init__(self):
        prices = [self.price] if isinstance(self.price, (int, float)) else list(self.price)
        if any(p < 0 for p in prices):
            raise DomainError("offloading prices must be non-negative")


@dataclass(frozen=True)
class SocialIteration:
    """Users internalizing the congestion they cause to everybody."""


GameKind = Union[RegulatedSelfish, SocialIteration]


@dataclass
class IterationState:
    x: np.ndarray
    sweep: int = 0
    delta_x: float = math.inf


def regulated_response_curve(
    x: float, u: UserProfile, cfg: SystemConfig, price: float, curve: Optional[DemandCurve] = None
) -> float:
    """F_N(x); infinite where the net demand is not positive."""
    g = curve or DemandCurve(u, cfg)
    h = g(x) - price
    if h <= 0:
        return math.inf
    half = u.c_t / (2.0 * h)
    return cfg.lambda_a * x + half + math.sqrt(half ** 2 + u.c_t * cfg.lambda_a * x / h)


def social_response_curve(
    x: float, u: UserProfile, cfg: SystemConfig, curve: Optional[DemandCurve] = None
) -> float:
    """F_S(x); infinite where the demand is not positive."""
    g = (curve or DemandCurve(u, cfg))(x)
    if g <= 0:
        return math.inf
    return cfg.lambda_a * x + math.sqrt(u.c_t * cfg.mu_B / g)


def _solve_curve(
    k: int, curve: Callable[[float], float], b: float, cap: float, label: str
) -> float:
    hi = cap * (1.0 - CAP_GUARD)
    root = bisect_root(lambda x: curve(x) - b, 0.0, hi, label=f"{label} response of user {k}")
    if root.value >= 1.0:
        raise SolverError(f"user {k}: best response {root.value} reached the box bound x = 1")
    return root.value


def best_response_regulated(
    k: int,
    b: float,
    u: UserProfile,
    price: float,
    cfg: SystemConfig,
    cap: Optional[float] = None,
    curve: Optional[DemandCurve] = None,
) -> float:
    """Profit-maximizing frequency of user k under unit price `price`."""
    if b <= 0:
        raise InfeasibleError(f"user {k}: no residual edge capacity (b={b:.6g})")
    g = curve or DemandCurve(u, cfg)
    net_at_zero = g.at_zero - price
    if net_at_zero <= 0 or b <= u.c_t / net_at_zero:
        return 0.0
    if cap is None:
        cap = g.root(price)
    return _solve_curve(k, lambda x: regulated_response_curve(x, u, cfg, price, g), b, cap, "regulated")


def best_response_social(
    k: int,
    b: float,
    u: UserProfile,
    cfg: SystemConfig,
    cap: Optional[float] = None,
    curve: Optional[DemandCurve] = None,
) -> float:
    """Frequency of user k that is optimal for the sum of profits."""
    if b <= 0:
        raise InfeasibleError(f"user {k}: no residual edge capacity (b={b:.6g})")
    g = curve or DemandCurve(u, cfg)
    if b <= math.sqrt(u.c_t * cfg.mu_B / g.at_zero):
        return 0.0
    if cap is None:
        cap = g.root()
    return _solve_curve(k, lambda x: social_response_curve(x, u, cfg, g), b, cap, "social")


def _responder(users: Sequence[UserProfile], cfg: SystemConfig, kind: GameKind) -> Callable[[int, float], float]:
    """Best-response function of (user, residual capacity) with demand curves and roots cached."""
    curves = [DemandCurve(u, cfg) for u in users]
    if isinstance(kind, RegulatedSelfish):
        prices = [price_for(kind.price, k) for k in range(len(users))]
        caps = [g.root(p) for g, p in zip(curves, prices)]
        return lambda k, b: best_response_regulated(k, b, users[k], prices[k], cfg, cap=caps[k], curve=curves[k])
    caps = [g.root() for g in curves]
    return lambda k, b: best_response_social(k, b, users[k], cfg, cap=caps[k], curve=curves[k])


def certification_gap(x: np.ndarray, respond: Callable[[int, float], float], cfg: SystemConfig) -> float:
    """Largest move any single user would make from x given everybody else."""
    load = cfg.lambda_a * float(x.sum())
    gaps = [
        abs(respond(k, cfg.mu_B - (load - cfg.lambda_a * x[k])) - x[k]) for k in range(x.size)
    ]
    return max(gaps) if gaps else 0.0


def run_gauss_seidel(
    users: Sequence[UserProfile],
    cfg: SystemConfig,
    kind: GameKind,
    x0: Optional[OffloadVector] = None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    order: Optional[Sequence[int]] = None,
    update: str = "gauss-seidel",
) -> EquilibriumResult:
    """
    Sweep best responses until the mean per-user change drops to cfg.epsilon.

    Each update in a Gauss-Seidel sweep sees the freshest values of the other
    users; "jacobi" computes every response from the previous sweep instead.
    A run only stops once a read-only pass confirms no user would move by more
    than epsilon.
    """
    n = len(users)
    if n == 0:
        raise DomainError("at least one user is required")
    if update not in ("gauss-seidel", "jacobi"):
        raise DomainError(f"unknown update mode '{update}'")
    for u in users:
        u.check_stable(cfg)

    start = OffloadVector.zeros(n) if x0 is None else OffloadVector(np.array(x0.x, copy=True))
    if len(start) != n:
        raise DomainError(f"start vector has {len(start)} entries for {n} users")
    start.require_stable(cfg)

    sweep_order = list(range(n)) if order is None else list(order)
    if sorted(sweep_order) != list(range(n)):
        raise DomainError("sweep order must be a permutation of the user indices")

    respond = _responder(users, cfg, kind)
    label = "social" if isinstance(kind, SocialIteration) else "regulated"
    lam, mu_b = cfg.lambda_a, cfg.mu_B

    state = IterationState(x=start.x)
    trace: List[TraceRow] = []
    gap = math.inf
    logger.info(f"{label} best-response run: N={n}, epsilon={cfg.epsilon:g}, update={update}")

    while True:
        if state.sweep >= max_sweeps:
            raise NonConvergenceError(
                f"{label} iteration did not converge within {max_sweeps} sweeps "
                f"(last delta_x {state.delta_x:.3e})",
                trace=trace,
                last_x=state.x.copy(),
            )
        prev = state.x.copy()
        load = lam * float(state.x.sum())
        prev_load = load
        for k in sweep_order:
            if update == "jacobi":
                b = mu_b - (prev_load - lam * prev[k])
            else:
                b = mu_b - (load - lam * state.x[k])
            new = respond(k, b)
            load += lam * (new - state.x[k])
            state.x[k] = new
            if update == "gauss-seidel" and load >= mu_b:
                raise InfeasibleError(f"edge overloaded after updating user {k}")

        load = lam * float(state.x.sum())
        if load >= mu_b:
            raise InfeasibleError(f"edge overloaded after sweep {state.sweep + 1} ({load:.6g} >= {mu_b:.6g})")

        state.sweep += 1
        state.delta_x = float(np.mean(np.abs(state.x - prev)))
        trace.append(TraceRow(sweep=state.sweep, mean_x=float(state.x.mean()), delta_x=state.delta_x))
        logger.debug(f"{label} sweep {state.sweep}: mean x {state.x.mean():.6f}, delta {state.delta_x:.3e}")

        if state.delta_x <= cfg.epsilon:
            gap = certification_gap(state.x, respond, cfg)
            if gap <= cfg.epsilon:
                break

    xs = OffloadVector(state.x)
    if isinstance(kind, SocialIteration):
        eq_kind = EquilibriumKind.SE
        price = 0.0
        residual = max_abs(social_condition_residuals(xs, users, cfg))
    else:
        price = kind.price if isinstance(kind.price, (int, float)) else [float(p) for p in kind.price]
        charged = any(price_for(price, k) > 0 for k in range(n))
        eq_kind = EquilibriumKind.REGULATED_NE if charged else EquilibriumKind.NE
        residual = max_abs(selfish_condition_residuals(xs, users, cfg, price))

    logger.info(
        f"{label} run converged in {state.sweep} sweeps: mean x {xs.mean:.6f}, "
        f"residual {residual:.2e}, certification gap {gap:.2e}"
    )
    return EquilibriumResult(
        x_star=xs,
        kind=eq_kind,
        price=price,
        residual=residual,
        iterations=state.sweep,
        trace=trace,
        trivial=bool(np.all(state.x == 0)),
        certification_gap=gap,
    )
