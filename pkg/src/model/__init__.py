"""Physical-layer and economic model of offloading."""

from .channel import (
    NEVER_OFFLOAD,
    RAYLEIGH,
    ChannelModel,
    NakagamiChannel,
    RayleighChannel,
    frequency_from_threshold,
    snr_from_distance,
    threshold_derivative,
    threshold_from_frequency,
)
from .costs import (
    CostBreakdown,
    DemandCurve,
    OffloadVector,
    cost_breakdown,
    cost_breakdowns,
    demand,
    demand_at_zero,
    demand_or_limit,
    demand_root,
    edge_cost,
    local_cost,
    profit,
    profits,
    utility,
)
from .exceptions import (
    DomainError,
    InfeasibleError,
    NonConvergenceError,
    OffloadingError,
    ScenarioError,
    SolverError,
)
from .parameters import ChannelSpec, SystemConfig, UserProfile
