"""Scenario files, experiment orchestration and result tables."""

from .results import ResultTable, artifact_version
from .runner import (
    cmd_convergence,
    cmd_delays,
    cmd_sim_validate,
    cmd_solve,
    cmd_sweep,
    optimal_price,
    run_experiment,
    sim_config_for,
)
from .scenario import (
    ExperimentSpec,
    HomogeneousUsers,
    RingUsers,
    Scenario,
    default_scenario,
    dump_scenario,
    load_scenario,
    parse_scenario,
    write_scenario,
)
