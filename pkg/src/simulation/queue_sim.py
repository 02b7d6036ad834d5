"""
Slotted arrival / offload / service simulation of the offloading system.

Each user sees a Bernoulli(p_a) job arrival per slot. On arrival it draws a
channel gain and offloads the job iff the gain supports its rate threshold,
otherwise the job joins its own FIFO queue. Offloaded jobs from all users share
one FIFO queue at the edge. Arrivals sit on slot boundaries; service times are
continuous exponentials. Transmission airtime is not part of the edge sojourn.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..model.channel import frequency_from_threshold
from ..model.exceptions import DomainError, InfeasibleError
from ..model.parameters import SystemConfig, UserProfile

logger = logging.getLogger(__name__)

DEFAULT_WARMUP_FRACTION = 0.1
CI_BATCHES = 20
CI_LEVEL = 0.95
SEED_MAX = 2 ** 64


@dataclass(frozen=True)
class SimUser:
    """A user and the rate threshold it applies (math.inf never offloads)."""

    profile: UserProfile
    beta: float

    def __post_init__(self):
        if math.isnan(self.beta) or self.beta < 0:
            raise DomainError(f"rate threshold must be non-negative, got {self.beta}")


@dataclass(frozen=True)
class SimConfig:
    horizon_slots: int
    users: Sequence[SimUser]
    cfg: SystemConfig
    seed: int = 0
    warmup_slots: Optional[int] = None

    def __post_init__(self):
        if self.warmup_slots is None:
            object.__setattr__(self, "warmup_slots", int(self.horizon_slots * DEFAULT_WARMUP_FRACTION))
        if not self.horizon_slots > self.warmup_slots >= 0:
            raise DomainError(
                f"need horizon_slots > warmup_slots >= 0, got {self.horizon_slots} and {self.warmup_slots}"
            )
        if not 0 <= self.seed < SEED_MAX:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not self.users:
            raise DomainError("simulation needs at least one user")

    def analytic_frequencies(self) -> np.ndarray:
        ch = self.cfg.channel_model
        return np.array(
            [frequency_from_threshold(u.beta, u.profile.snr(self.cfg), ch) for u in self.users]
        )


@dataclass
class MeanEstimate:
    """Sample mean with a batch-means confidence half-width (nan when undefined)."""

    mean: float
    half_width: float
    count: int

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean, "half_width": self.half_width, "count": self.count}


@dataclass
class QueueCounts:
    arrivals: int
    departed: int
    in_system: int

    @property
    def conserved(self) -> bool:
        return self.arrivals == self.departed + self.in_system


@dataclass
class SimReport:
    """Empirical measurements of one run next to their analytic values."""

    seed: int
    horizon_slots: int
    warmup_slots: int
    arrivals: np.ndarray
    offloads: np.ndarray
    frequencies: np.ndarray
    analytic_frequencies: np.ndarray
    local_sojourn: List[MeanEstimate]
    local_analytic: np.ndarray
    pooled_local: MeanEstimate
    pooled_local_analytic: float
    edge_sojourn: MeanEstimate
    edge_analytic: float
    expected_edge_arrivals: float
    edge_arrivals_sd: float
    local_counts: QueueCounts
    edge_counts: QueueCounts
    notes: List[str] = field(default_factory=list)

    @property
    def superposition_ok(self) -> bool:
        """Edge arrival count within 3 standard deviations of the superposed rate."""
        gap = abs(self.edge_counts.arrivals - self.expected_edge_arrivals)
        return gap <= 3.0 * self.edge_arrivals_sd or (self.edge_arrivals_sd == 0 and gap == 0)

    @property
    def local_rel_gap(self) -> float:
        return _rel_gap(self.pooled_local.mean, self.pooled_local_analytic)

    @property
    def edge_rel_gap(self) -> float:
        """nan when nothing was offloaded."""
        if self.edge_sojourn.count == 0:
            return math.nan
        return _rel_gap(self.edge_sojourn.mean, self.edge_analytic)

    def passed(self, rel_tol: float) -> bool:
        edge_ok = self.edge_sojourn.count == 0 or self.edge_rel_gap < rel_tol
        return (
            self.local_rel_gap < rel_tol
            and edge_ok
            and self.superposition_ok
            and self.local_counts.conserved
            and self.edge_counts.conserved
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "horizon_slots": self.horizon_slots,
            "warmup_slots": self.warmup_slots,
            "frequencies": self.frequencies.tolist(),
            "analytic_frequencies": self.analytic_frequencies.tolist(),
            "pooled_local": self.pooled_local.to_dict(),
            "pooled_local_analytic": self.pooled_local_analytic,
            "edge_sojourn": self.edge_sojourn.to_dict(),
            "edge_analytic": self.edge_analytic,
            "edge_arrivals": self.edge_counts.arrivals,
            "expected_edge_arrivals": self.expected_edge_arrivals,
            "notes": list(self.notes),
        }


@dataclass
class FrequencyCheck:
    user: int
    empirical: float
    analytic: float
    gap: float
    std_error: float
    within_3se: bool


def _rel_gap(value: float, reference: float) -> float:
    if reference == 0:
        return math.inf if value != 0 else 0.0
    return abs(value - reference) / abs(reference)


def _streams(seed: int, n_users: int) -> List[np.random.Generator]:
    """One counter-based generator per user plus one for edge service times."""
    children = np.random.SeedSequence(seed).spawn(n_users + 1)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _arrival_slots(rng: np.random.Generator, p_a: float, horizon: int) -> np.ndarray:
    """Slot indices of Bernoulli(p_a) arrivals in [0, horizon), via geometric gaps."""
    expected = p_a * horizon
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    slots: List[np.ndarray] = []
    last = -1
    while last < horizon:
        gaps = rng.geometric(p_a, size=chunk)
        block = last + np.cumsum(gaps)
        slots.append(block)
        last = int(block[-1])
    out = np.concatenate(slots)
    return out[out < horizon]


def _fifo_departures(arrive: np.ndarray, service: np.ndarray) -> np.ndarray:
    """
    Departure times of a FIFO single server, arrivals sorted ascending.

    D_i = max(A_i, D_{i-1}) + S_i, unrolled as
    D_i = C_i + max_{j <= i} (A_j - C_{j-1}) with C the cumulative service.
    """
    if arrive.size == 0:
        return arrive.copy()
    done = np.cumsum(service)
    return done + np.maximum.accumulate(arrive - (done - service))


def _batch_means(samples: np.ndarray, batches: int = CI_BATCHES) -> MeanEstimate:
    n = samples.size
    if n == 0:
        return MeanEstimate(mean=math.nan, half_width=math.nan, count=0)
    mean = float(samples.mean())
    if n < 2 * batches:
        return MeanEstimate(mean=mean, half_width=math.nan, count=n)
    means = np.array([chunk.mean() for chunk in np.array_split(samples, batches)])
    t_crit = stats.t.ppf(0.5 + CI_LEVEL / 2.0, batches - 1)
    half = float(t_crit * means.std(ddof=1) / math.sqrt(batches))
    return MeanEstimate(mean=mean, half_width=half, count=n)


def _check_stable(sc: SimConfig, x: np.ndarray) -> None:
    cfg = sc.cfg
    for k, u in enumerate(sc.users):
        mu_m = u.profile.mu_m(cfg)
        if cfg.lambda_a * (1.0 - x[k]) >= mu_m:
            raise InfeasibleError(
                f"user {k}: local queue unstable ({cfg.lambda_a * (1.0 - x[k]):.6g} >= {mu_m:.6g})"
            )
    load = cfg.lambda_a * float(x.sum())
    if load >= cfg.mu_B:
        raise InfeasibleError(f"edge queue unstable ({load:.6g} >= {cfg.mu_B:.6g})")


def _counts(arrive: np.ndarray, depart: np.ndarray, t_end: float) -> QueueCounts:
    departed = int(np.count_nonzero(depart <= t_end))
    in_system = int(np.count_nonzero((arrive <= t_end) & (depart > t_end)))
    return QueueCounts(arrivals=int(arrive.size), departed=departed, in_system=in_system)


def run_sim(sc: SimConfig) -> SimReport:
    """Simulate `sc.horizon_slots` slots and measure sojourns of jobs arriving after warmup."""
    cfg = sc.cfg
    n = len(sc.users)
    x_analytic = sc.analytic_frequencies()
    _check_stable(sc, x_analytic)

    t0 = cfg.t0
    t_warm = sc.warmup_slots * t0
    t_end = sc.horizon_slots * t0
    ch = cfg.channel_model
    rngs = _streams(sc.seed, n)
    logger.info(f"simulating {n} users over {sc.horizon_slots} slots (seed {sc.seed})")

    arrivals = np.zeros(n, dtype=np.int64)
    offloads = np.zeros(n, dtype=np.int64)
    local_est: List[MeanEstimate] = []
    local_analytic = np.empty(n)
    pooled: List[np.ndarray] = []
    local_arrive_all: List[np.ndarray] = []
    local_depart_all: List[np.ndarray] = []
    edge_times: List[np.ndarray] = []

    for k, user in enumerate(sc.users):
        rng = rngs[k]
        rho = user.profile.snr(cfg)
        mu_m = user.profile.mu_m(cfg)
        slots = _arrival_slots(rng, cfg.p_a, sc.horizon_slots)
        times = slots * t0
        gains = ch.sample(rng, times.size)
        gain_threshold = math.inf if math.isinf(user.beta) else math.expm1(user.beta) / rho
        offload = gains > gain_threshold

        arrivals[k] = times.size
        offloads[k] = int(np.count_nonzero(offload))
        edge_times.append(times[offload])

        local_arrive = times[~offload]
        local_depart = _fifo_departures(local_arrive, rng.exponential(1.0 / mu_m, size=local_arrive.size))
        local_arrive_all.append(local_arrive)
        local_depart_all.append(local_depart)
        measured = local_arrive >= t_warm
        sojourn = local_depart[measured] - local_arrive[measured]
        pooled.append(sojourn)
        local_est.append(_batch_means(sojourn))
        local_analytic[k] = 1.0 / (mu_m - cfg.lambda_a * (1.0 - x_analytic[k]))

    edge_arrive = np.concatenate(edge_times)
    edge_arrive = edge_arrive[np.argsort(edge_arrive, kind="stable")]
    edge_depart = _fifo_departures(edge_arrive, rngs[n].exponential(1.0 / cfg.mu_B, size=edge_arrive.size))
    edge_measured = edge_arrive >= t_warm
    edge_est = _batch_means(edge_depart[edge_measured] - edge_arrive[edge_measured])
    edge_load = cfg.lambda_a * float(x_analytic.sum())

    weights = np.array([est.count for est in local_est], dtype=float)
    pooled_analytic = (
        float(np.dot(weights, local_analytic) / weights.sum()) if weights.sum() > 0 else math.nan
    )
    # superposition of per-user Bernoulli offload streams
    per_slot = cfg.p_a * x_analytic
    expected_edge = float(per_slot.sum()) * sc.horizon_slots
    edge_sd = math.sqrt(float(np.sum(per_slot * (1.0 - per_slot))) * sc.horizon_slots)

    report = SimReport(
        seed=sc.seed,
        horizon_slots=sc.horizon_slots,
        warmup_slots=sc.warmup_slots,
        arrivals=arrivals,
        offloads=offloads,
        frequencies=np.divide(offloads, arrivals, out=np.zeros(n), where=arrivals > 0),
        analytic_frequencies=x_analytic,
        local_sojourn=local_est,
        local_analytic=local_analytic,
        pooled_local=_batch_means(np.concatenate(pooled)),
        pooled_local_analytic=pooled_analytic,
        edge_sojourn=edge_est,
        edge_analytic=1.0 / (cfg.mu_B - edge_load),
        expected_edge_arrivals=expected_edge,
        edge_arrivals_sd=edge_sd,
        local_counts=_counts(np.concatenate(local_arrive_all), np.concatenate(local_depart_all), t_end),
        edge_counts=_counts(edge_arrive, edge_depart, t_end),
    )
    if edge_est.count == 0:
        report.notes.append("no offloaded jobs after warmup; edge sojourn not measured")
    logger.info(
        f"simulation done: local {report.pooled_local.mean:.6g}s (analytic {pooled_analytic:.6g}s), "
        f"edge {edge_est.mean:.6g}s (analytic {report.edge_analytic:.6g}s), "
        f"{report.edge_counts.arrivals} edge jobs"
    )
    if not report.superposition_ok:
        logger.warning(
            f"edge arrivals {report.edge_counts.arrivals} outside 3 sd of {expected_edge:.1f}"
        )
    return report


def validate_frequency(sc: SimConfig, report: Optional[SimReport] = None) -> List[FrequencyCheck]:
    """Per-user empirical offload frequency against the analytic one, in binomial standard errors."""
    if report is None:
        report = run_sim(sc)
    checks = []
    for k in range(len(sc.users)):
        analytic = float(report.analytic_frequencies[k])
        empirical = float(report.frequencies[k])
        trials = int(report.arrivals[k])
        se = math.sqrt(analytic * (1.0 - analytic) / trials) if trials else math.inf
        gap = abs(empirical - analytic)
        checks.append(
            FrequencyCheck(
                user=k,
                empirical=empirical,
                analytic=analytic,
                gap=gap,
                std_error=se,
                within_3se=gap <= 3.0 * se,
            )
        )
    return checks


def frequency_pass_rate(checks: Sequence[FrequencyCheck]) -> float:
    return sum(c.within_3se for c in checks) / len(checks) if checks else 1.0


def _run_seed(args: Tuple[SimConfig, int]) -> SimReport:
    sc, seed = args
    return run_sim(replace(sc, seed=seed))


def replicate(sc: SimConfig, seeds: Sequence[int], workers: int = 1) -> List[SimReport]:
    """Independent runs over `seeds`, in seed order regardless of completion order."""
    jobs = [(sc, s) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_seed(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed, jobs))
