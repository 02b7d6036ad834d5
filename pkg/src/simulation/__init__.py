"""Queueing simulation used to check the analytic delay and frequency formulas."""

from .queue_sim import (
    FrequencyCheck,
    MeanEstimate,
    QueueCounts,
    SimConfig,
    SimReport,
    SimUser,
    frequency_pass_rate,
    replicate,
    run_sim,
    validate_frequency,
)
