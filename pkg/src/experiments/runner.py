"""
Experiment orchestration: solve, convergence traces, parameter sweeps, delay
tables, utility curves and simulation checks, each producing one ResultTable.

Library errors never abort a command. A failing run becomes a flagged row and a
failed record in the RunMonitor, so the CLI can still write the table and set
its exit status from the monitor.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..engine.best_response import (
    DEFAULT_MAX_SWEEPS,
    RegulatedSelfish,
    SocialIteration,
    run_gauss_seidel,
)
from ..engine.pricing import personalized_prices, uniform_price
from ..equilibrium.homogeneous import (
    HomogeneousScenario,
    optimal_price_homogeneous,
    solve_ne_homogeneous,
    solve_se_homogeneous,
)
from ..equilibrium.results import EquilibriumResult, Price, price_for
from ..model.channel import threshold_from_frequency
from ..model.costs import DemandCurve, OffloadVector, cost_breakdown, cost_breakdowns, utility
from ..model.exceptions import NonConvergenceError, OffloadingError, ScenarioError
from ..model.parameters import SystemConfig, UserProfile
from ..monitoring.run_monitor import RunMonitor
from ..simulation.queue_sim import SimConfig, SimUser, frequency_pass_rate, replicate, validate_frequency
from .results import ResultTable
from .scenario import Scenario

logger = logging.getLogger(__name__)

SOLVE_COLUMNS = [
    "user", "distance", "snr",
    "x_ne", "x_se", "x_priced",
    "beta_ne", "beta_se", "beta_priced",
    "profit_ne", "profit_se", "profit_priced", "price",
]
CONVERGENCE_COLUMNS = ["game", "sweep", "mean_x", "delta_x", "reference", "status"]
SWEEP_COLUMNS = [
    "n_users", "distance",
    "x_ne", "x_se", "profit_ne", "profit_se", "profit_ratio",
    "local_delay_ne", "edge_delay_ne", "local_delay_se", "edge_delay_se",
    "optimal_price", "status",
]
DELAY_COLUMNS = [
    "user", "distance",
    "local_delay_ne", "edge_delay_ne",
    "local_delay_se", "edge_delay_se",
    "local_delay_priced", "edge_delay_priced",
]
SIM_COLUMNS = [
    "replication", "seed", "quantity", "analytic", "simulated", "ci_half_width", "rel_gap", "passed",
]
UTILITY_COLUMNS = ["distance", "snr", "x", "utility", "demand", "x_up"]


def _track(monitor: RunMonitor, op_id: str, kind: str, fn, context: Dict[str, Any] = None):
    """Run fn() under the monitor; returns (value, error). Only library errors are caught."""
    monitor.start_operation(op_id, kind, context)
    try:
        value = fn()
    except OffloadingError as e:
        logger.warning(f"{op_id} failed: {e}")
        monitor.end_operation(op_id, success=False, error_info=f"{type(e).__name__}: {e}")
        return None, e
    data: Dict[str, Any] = {}
    if isinstance(value, EquilibriumResult):
        data = {"sweeps": value.sweeps, "residual": value.residual}
    monitor.end_operation(op_id, success=True, result_data=data)
    return value, None


def _price_label(price: Price) -> Union[float, str]:
    if isinstance(price, (int, float)):
        return float(price)
    return "per-user"


def optimal_price(scenario: Scenario, social: EquilibriumResult) -> Price:
    """Price steering selfish users to `social`: exact for identical users, else by price_rule."""
    users = scenario.population()
    cfg = scenario.effective_config()
    if scenario.is_homogeneous:
        return optimal_price_homogeneous(scenario.homogeneous())
    if scenario.experiment.price_rule == "exact":
        return personalized_prices(social.x_star, users, cfg)
    return uniform_price(social.x_star, cfg, users[0].c_t)


def _user_delays(xs: OffloadVector, users: Sequence[UserProfile], cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Local sojourn and total offloaded-job delay (airtime plus edge sojourn) per user."""
    local, edge = [], []
    for b in cost_breakdowns(xs, users, cfg):
        local.append(b.d_lc)
        edge.append(b.d_ec1 + b.d_ec2 if b.d_ec2 > 0 else math.nan)
    return np.array(local), np.array(edge)


def cmd_solve(
    scenario: Scenario, monitor: Optional[RunMonitor] = None, max_sweeps: int = DEFAULT_MAX_SWEEPS
) -> ResultTable:
    """Nash, social and priced equilibria of the scenario's population, per user."""
    monitor = monitor or RunMonitor()
    users = scenario.population()
    cfg = scenario.effective_config()
    ch = cfg.channel_model
    table = ResultTable.create("solve", SOLVE_COLUMNS, scenario.seed, users=scenario.users.kind)

    ne, _ = _track(monitor, "solve-ne", "engine",
                   lambda: run_gauss_seidel(users, cfg, RegulatedSelfish(0.0), max_sweeps=max_sweeps))
    se, _ = _track(monitor, "solve-se", "engine",
                   lambda: run_gauss_seidel(users, cfg, SocialIteration(), max_sweeps=max_sweeps))
    priced: Optional[EquilibriumResult] = None
    price: Optional[Price] = None
    if se is not None:
        price, _ = _track(monitor, "solve-price", "pricing", lambda: optimal_price(scenario, se))
        if price is not None:
            priced, _ = _track(monitor, "solve-priced", "engine",
                               lambda: run_gauss_seidel(users, cfg, RegulatedSelfish(price), max_sweeps=max_sweeps))

    def column(result: Optional[EquilibriumResult]) -> Tuple[List[float], List[float]]:
        if result is None:
            return [math.nan] * len(users), [math.nan] * len(users)
        breakdowns = cost_breakdowns(result.x_star, users, cfg)
        return result.x_star.to_list(), [b.profit for b in breakdowns]

    (x_ne, p_ne), (x_se, p_se), (x_pr, p_pr) = column(ne), column(se), column(priced)
    for k, u in enumerate(users):
        rho = u.snr(cfg)
        betas = [
            math.nan if math.isnan(x) else threshold_from_frequency(x, rho, ch)
            for x in (x_ne[k], x_se[k], x_pr[k])
        ]
        charged = math.nan if price is None else price_for(price, k)
        table.add_row(
            k, u.d if u.d is not None else math.nan, rho,
            x_ne[k], x_se[k], x_pr[k], *betas,
            p_ne[k], p_se[k], p_pr[k], charged,
        )
    return table


def _trace_rows(table: ResultTable, game: str, result: Optional[EquilibriumResult], error, reference: float) -> None:
    if result is not None:
        for row in result.trace:
            table.add_row(game, row.sweep, row.mean_x, row.delta_x, reference, "converged")
        return
    if isinstance(error, NonConvergenceError) and error.trace:
        for row in error.trace:
            table.add_row(game, row.sweep, row.mean_x, row.delta_x, reference, "nonconverged")
        return
    table.add_row(game, 0, math.nan, math.nan, reference, f"error: {error}")


def cmd_convergence(
    scenario: Scenario, monitor: Optional[RunMonitor] = None, max_sweeps: int = DEFAULT_MAX_SWEEPS
) -> ResultTable:
    """Per-sweep traces of the unpriced, optimally priced and social best-response runs."""
    monitor = monitor or RunMonitor()
    users = scenario.population()
    cfg = scenario.effective_config()
    table = ResultTable.create("convergence", CONVERGENCE_COLUMNS, scenario.seed, epsilon=cfg.epsilon)

    ref_ne = ref_se = math.nan
    if scenario.is_homogeneous:
        hs = scenario.homogeneous()
        ne_closed, _ = _track(monitor, "closed-ne", "closed-form", lambda: solve_ne_homogeneous(hs))
        se_closed, _ = _track(monitor, "closed-se", "closed-form", lambda: solve_se_homogeneous(hs))
        ref_ne = ne_closed.mean_x if ne_closed is not None else math.nan
        ref_se = se_closed.mean_x if se_closed is not None else math.nan

    social, social_err = _track(monitor, "converge-social", "engine",
                                lambda: run_gauss_seidel(users, cfg, SocialIteration(), max_sweeps=max_sweeps))
    plain, plain_err = _track(monitor, "converge-p0", "engine",
                              lambda: run_gauss_seidel(users, cfg, RegulatedSelfish(0.0), max_sweeps=max_sweeps))

    priced, priced_err, price = None, None, None
    if social is not None:
        price, priced_err = _track(monitor, "converge-price", "pricing", lambda: optimal_price(scenario, social))
    if price is not None:
        priced, priced_err = _track(monitor, "converge-priced", "engine",
                                    lambda: run_gauss_seidel(users, cfg, RegulatedSelfish(price), max_sweeps=max_sweeps))
    elif priced_err is None:
        priced_err = social_err
    table.metadata["price"] = _price_label(price) if price is not None else None

    _trace_rows(table, "regulated_p0", plain, plain_err, ref_ne)
    _trace_rows(table, "regulated_optimal", priced, priced_err, ref_se)
    _trace_rows(table, "social", social, social_err, ref_se)
    return table


def _sweep_point(task: Tuple[str, float, HomogeneousScenario]) -> List[Any]:
    axis, value, hs = task
    n, d = hs.n_users, hs.profile.d
    try:
        ne = solve_ne_homogeneous(hs)
        se = solve_se_homogeneous(hs)
        price = optimal_price_homogeneous(hs)
        users, cfg = hs.users(), hs.cfg
        profit_ne = cost_breakdown(0, ne.x_star, users, cfg).profit
        profit_se = cost_breakdown(0, se.x_star, users, cfg).profit
        local_ne, edge_ne = _user_delays(ne.x_star, users, cfg)
        local_se, edge_se = _user_delays(se.x_star, users, cfg)
    except OffloadingError as e:
        return [n, d] + [math.nan] * 10 + [f"error: {e}"]
    ratio = profit_se / profit_ne if profit_ne > 0 else math.nan
    status = "trivial" if ne.trivial or se.trivial else "ok"
    return [
        n, d, ne.x_star[0], se.x_star[0], profit_ne, profit_se, ratio,
        float(local_ne[0]), float(edge_ne[0]), float(local_se[0]), float(edge_se[0]),
        price, status,
    ]


def cmd_sweep(
    scenario: Scenario,
    axis: str,
    monitor: Optional[RunMonitor] = None,
    workers: int = 1,
) -> ResultTable:
    """Closed-form equilibria over the user-count grid (axis "n") or distance grid (axis "d")."""
    monitor = monitor or RunMonitor()
    if not scenario.is_homogeneous:
        raise ScenarioError("sweeps use the closed-form solvers and need homogeneous users")
    if axis not in ("n", "d"):
        raise ScenarioError(f"unknown sweep axis '{axis}'")
    exp = scenario.experiment
    table = ResultTable.create(f"sweep_{axis}", SWEEP_COLUMNS, scenario.seed, axis=axis)

    tasks: List[Tuple[str, float, HomogeneousScenario]] = []
    for value in (exp.n_grid if axis == "n" else exp.d_grid):
        op_id = f"sweep-{axis}-{value}"
        monitor.start_operation(op_id, "closed-form", {"axis": axis, "value": value})
        try:
            if axis == "n":
                hs = scenario.homogeneous(n=int(value))
            else:
                hs = scenario.homogeneous(profile=scenario.users.profile.at_distance(float(value), scenario.system))
        except OffloadingError as e:
            monitor.end_operation(op_id, success=False, error_info=f"{type(e).__name__}: {e}")
            n = int(value) if axis == "n" else scenario.users.n
            d = scenario.users.profile.d if axis == "n" else float(value)
            table.add_row(n, d, *([math.nan] * 10), f"error: {e}")
            continue
        tasks.append((axis, value, hs))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(task) for task in tasks]

    for (axis_, value, _), row in zip(tasks, rows):
        status = row[-1]
        ok = not str(status).startswith("error")
        if not ok:
            logger.warning(f"sweep point {axis_}={value} flagged: {status}")
        monitor.end_operation(f"sweep-{axis_}-{value}", success=ok, error_info=None if ok else status)
        table.add_row(*row)
    return table


def cmd_delays(
    scenario: Scenario, monitor: Optional[RunMonitor] = None, max_sweeps: int = DEFAULT_MAX_SWEEPS
) -> ResultTable:
    """Per-user local and offloaded-job delays at the Nash, social and priced equilibria."""
    monitor = monitor or RunMonitor()
    users = scenario.population()
    cfg = scenario.effective_config()
    table = ResultTable.create("delays", DELAY_COLUMNS, scenario.seed)

    ne, _ = _track(monitor, "delays-ne", "engine",
                   lambda: run_gauss_seidel(users, cfg, RegulatedSelfish(0.0), max_sweeps=max_sweeps))
    se, _ = _track(monitor, "delays-se", "engine",
                   lambda: run_gauss_seidel(users, cfg, SocialIteration(), max_sweeps=max_sweeps))
    priced = None
    if se is not None:
        price, _ = _track(monitor, "delays-price", "pricing", lambda: optimal_price(scenario, se))
        if price is not None:
            priced, _ = _track(monitor, "delays-priced", "engine",
                               lambda: run_gauss_seidel(users, cfg, RegulatedSelfish(price), max_sweeps=max_sweeps))

    blank = np.full(len(users), math.nan)
    columns = []
    for result in (ne, se, priced):
        columns.extend(_user_delays(result.x_star, users, cfg) if result is not None else (blank, blank))
    for k, u in enumerate(users):
        table.add_row(k, u.d if u.d is not None else math.nan, *(float(c[k]) for c in columns))
    return table


def _social_vector(scenario: Scenario, monitor: RunMonitor, max_sweeps: int) -> Optional[EquilibriumResult]:
    if scenario.is_homogeneous:
        hs = scenario.homogeneous()
        result, _ = _track(monitor, "simulate-se", "closed-form", lambda: solve_se_homogeneous(hs))
        return result
    users, cfg = scenario.population(), scenario.effective_config()
    result, _ = _track(monitor, "simulate-se", "engine",
                       lambda: run_gauss_seidel(users, cfg, SocialIteration(), max_sweeps=max_sweeps))
    return result


def sim_config_for(scenario: Scenario, xs: OffloadVector, seed: int, warmup_fraction: Optional[float] = None) -> SimConfig:
    """Simulation of `scenario`'s population with thresholds realizing the vector xs."""
    users = scenario.population()
    cfg = scenario.effective_config()
    exp = scenario.experiment
    warmup = exp.warmup_slots
    if warmup is None and warmup_fraction is not None:
        warmup = int(exp.horizon_slots * warmup_fraction)
    sim_users = [
        SimUser(profile=u, beta=threshold_from_frequency(xs[k], u.snr(cfg), cfg.channel_model))
        for k, u in enumerate(users)
    ]
    return SimConfig(horizon_slots=exp.horizon_slots, warmup_slots=warmup, seed=seed, users=sim_users, cfg=cfg)


def cmd_sim_validate(
    scenario: Scenario,
    monitor: Optional[RunMonitor] = None,
    rel_tol: float = 0.05,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    warmup_fraction: Optional[float] = None,
    workers: int = 1,
) -> ResultTable:
    """Simulated sojourns and offload frequencies at the social equilibrium against the formulas.

    Replications run through `replicate`, on `workers` processes when more than one.
    """
    monitor = monitor or RunMonitor()
    table = ResultTable.create("sim_validate", SIM_COLUMNS, scenario.seed, rel_tol=rel_tol)
    se = _social_vector(scenario, monitor, max_sweeps)
    if se is None:
        table.add_row(0, scenario.seed, "social_equilibrium", math.nan, math.nan, math.nan, math.nan, False)
        return table

    seeds = [scenario.seed + r for r in range(scenario.experiment.replications)]
    for r, seed in enumerate(seeds):
        monitor.start_operation(f"simulate-{r}", "simulation", {"seed": seed})
    try:
        sc = sim_config_for(scenario, se.x_star, scenario.seed, warmup_fraction)
        reports = replicate(sc, seeds, workers=workers)
    except OffloadingError as e:
        logger.warning(f"simulation failed: {e}")
        for r, seed in enumerate(seeds):
            monitor.end_operation(f"simulate-{r}", success=False, error_info=f"{type(e).__name__}: {e}")
            table.add_row(r, seed, "simulation", math.nan, math.nan, math.nan, math.nan, False)
        return table

    for r, (seed, report) in enumerate(zip(seeds, reports)):
        checks = validate_frequency(sc, report)
        pass_rate = frequency_pass_rate(checks)
        edge_measured = report.edge_sojourn.count > 0
        local_ok = report.local_rel_gap < rel_tol
        edge_ok = not edge_measured or report.edge_rel_gap < rel_tol
        freq_ok = pass_rate >= 0.95

        table.add_row(r, seed, "local_sojourn", report.pooled_local_analytic, report.pooled_local.mean,
                      report.pooled_local.half_width, report.local_rel_gap, local_ok)
        table.add_row(r, seed, "edge_sojourn", report.edge_analytic,
                      report.edge_sojourn.mean if edge_measured else math.nan,
                      report.edge_sojourn.half_width if edge_measured else math.nan,
                      report.edge_rel_gap, edge_ok)
        table.add_row(r, seed, "offload_frequency_within_3se", 1.0, pass_rate, math.nan, math.nan, freq_ok)
        table.add_row(r, seed, "edge_arrivals", report.expected_edge_arrivals, float(report.edge_counts.arrivals),
                      3.0 * report.edge_arrivals_sd, math.nan, report.superposition_ok)

        passed = local_ok and edge_ok and freq_ok and report.superposition_ok
        if not passed:
            logger.warning(f"simulation check failed for seed {seed}")
        monitor.end_operation(
            f"simulate-{r}",
            success=passed,
            result_data={"edge_rel_gap": report.edge_rel_gap, "local_rel_gap": report.local_rel_gap},
            error_info=None if passed else "validation outside tolerance",
        )
    return table


UTILITY_X_MAX = 0.99


def cmd_utility(scenario: Scenario, monitor: Optional[RunMonitor] = None) -> ResultTable:
    """Utility U(x), demand g(x) and the demand root x_up over an x-grid, one curve per distance in d_grid."""
    monitor = monitor or RunMonitor()
    exp = scenario.experiment
    cfg = scenario.effective_config()
    xs = np.linspace(0.0, UTILITY_X_MAX, exp.x_points)
    table = ResultTable.create("utility", UTILITY_COLUMNS, scenario.seed, x_max=UTILITY_X_MAX)

    for d in exp.d_grid:
        op_id = f"utility-{d}"
        monitor.start_operation(op_id, "closed-form", {"distance": d})
        try:
            u = scenario.users.profile.at_distance(float(d), cfg)
            u.check_stable(cfg)
            curve = DemandCurve(u, cfg)
            x_up = curve.root()
            rows = [(float(x), utility(float(x), u, cfg), curve(float(x))) for x in xs]
        except OffloadingError as e:
            logger.warning(f"{op_id} failed: {e}")
            monitor.end_operation(op_id, success=False, error_info=f"{type(e).__name__}: {e}")
            table.add_row(float(d), math.nan, math.nan, math.nan, math.nan, math.nan)
            continue
        rho = u.snr(cfg)
        for x, value, slope in rows:
            table.add_row(float(d), rho, x, value, slope, x_up)
        monitor.end_operation(op_id, success=True, result_data={"x_up": x_up})
    return table


def run_experiment(
    scenario: Scenario,
    monitor: Optional[RunMonitor] = None,
    workers: int = 1,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    rel_tol: float = 0.05,
    warmup_fraction: Optional[float] = None,
) -> ResultTable:
    """Dispatch on the scenario's experiment kind."""
    kind = scenario.experiment.kind
    if kind == "convergence":
        return cmd_convergence(scenario, monitor, max_sweeps=max_sweeps)
    if kind == "sweep_n":
        return cmd_sweep(scenario, "n", monitor, workers=workers)
    if kind == "sweep_d":
        return cmd_sweep(scenario, "d", monitor, workers=workers)
    if kind == "delays":
        return cmd_delays(scenario, monitor, max_sweeps=max_sweeps)
    if kind == "utility":
        return cmd_utility(scenario, monitor)
    return cmd_sim_validate(
        scenario, monitor, rel_tol=rel_tol, max_sweeps=max_sweeps,
        warmup_fraction=warmup_fraction, workers=workers,
    )
