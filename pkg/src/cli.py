"""
Command Line Interface for the offloading pricing experiments.

Every command loads a scenario (or the built-in default), runs it, prints a
summary table and writes `<name>.csv|json` plus `<name>.meta.json` into the
output directory. The exit code is 0 only when every run converged and every
validation passed.
"""

import functools
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from .config.settings import settings
from .experiments.results import ResultTable
from .experiments.runner import (
    cmd_convergence,
    cmd_delays,
    cmd_sim_validate,
    cmd_solve,
    cmd_sweep,
    cmd_utility,
    run_experiment,
)
from .experiments.scenario import (
    HomogeneousUsers,
    RingUsers,
    Scenario,
    default_scenario,
    load_scenario,
    write_scenario,
)
from .model.exceptions import OffloadingError, ScenarioError
from .monitoring.run_monitor import RunMonitor

console = Console()

logging.basicConfig(
    level=getattr(logging, settings.log_level),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

MAX_ROWS_SHOWN = 25
EXIT_FAILED = 1
EXIT_BAD_SCENARIO = 2


def common_options(fn):
    @click.option('--scenario', 'scenario_path', type=click.Path(exists=True, dir_okay=False),
                  help='Scenario TOML file (default: built-in homogeneous scenario)')
    @click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
                  help='Output directory')
    @click.option('--seed', type=int, default=None, help='Seed (unsigned 64-bit)')
    @click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default='csv',
                  help='Table format')
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


def _load(scenario_path: Optional[str], seed: Optional[int]) -> Scenario:
    scenario = load_scenario(scenario_path) if scenario_path else default_scenario()
    if seed is None and not scenario_path:
        seed = settings.default_seed
    return scenario.with_seed(seed) if seed is not None else scenario


def _fmt(value) -> str:
    if isinstance(value, float):
        return "n/a" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def _show(table: ResultTable) -> None:
    view = Table(title=table.name, show_header=True, header_style="bold magenta")
    for col in table.columns:
        view.add_column(col, style="cyan" if col == table.columns[0] else "white")
    for row in table.rows[:MAX_ROWS_SHOWN]:
        view.add_row(*(_fmt(v) for v in row))
    console.print(view)
    if len(table.rows) > MAX_ROWS_SHOWN:
        console.print(f"[dim]... {len(table.rows) - MAX_ROWS_SHOWN} more rows in the output file[/dim]")


def _finish(table: ResultTable, monitor: RunMonitor, out_dir: Optional[str], fmt: str) -> None:
    status = monitor.status_summary()
    by_kind = monitor.get_real_time_stats()["by_kind"]
    path = table.write(Path(out_dir or settings.output_dir), fmt, {**status, "by_kind": by_kind})
    _show(table)

    summary = Table(title="Run Status", show_header=True, header_style="bold yellow")
    summary.add_column("Metric", style="cyan")
    summary.add_column("Value", style="white")
    for key in ("status", "runs", "sweeps", "residual", "wall_time_ms"):
        summary.add_row(key.replace("_", " ").title(), _fmt(status[key]))
    console.print(summary)

    kinds = Table(title="Runs by Kind", show_header=True, header_style="bold yellow")
    kinds.add_column("Kind", style="cyan")
    kinds.add_column("Runs", justify="right")
    kinds.add_column("Failed", justify="right")
    kinds.add_column("Avg ms", justify="right")
    for kind, stats in sorted(by_kind.items()):
        kinds.add_row(kind, str(stats["total_runs"]), str(stats["failed_runs"]),
                      f"{stats['average_wall_time_ms']:.1f}")
    console.print(kinds)
    for failure in status["failures"]:
        console.print(f"[red]  • {failure['operation_id']}: {failure['error']}[/red]")
    console.print(f"Wrote [bold]{path}[/bold]")

    if status["status"] != "ok":
        sys.exit(EXIT_FAILED)


def _execute(title: str, out_dir: Optional[str], fmt: str, work) -> None:
    """Run `work(monitor)` under a spinner; scenario and library errors become exit codes."""
    monitor = RunMonitor()
    try:
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            transient=True,
        ) as progress:
            progress.add_task(title, total=None)
            table = work(monitor)
    except ScenarioError as e:
        console.print(f"[bold red]Scenario error: {e}[/bold red]")
        sys.exit(EXIT_BAD_SCENARIO)
    except OffloadingError as e:
        console.print(f"[bold red]{title} failed: {e}[/bold red]")
        logger.exception(f"{title} failed")
        sys.exit(EXIT_FAILED)
    except Exception as e:
        console.print(f"[bold red]{title} failed unexpectedly: {e}[/bold red]")
        logger.exception(f"Unexpected error in {title}")
        sys.exit(EXIT_FAILED)
    _finish(table, monitor, out_dir, fmt)


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
def cli(verbose):
    """Offloading games on a shared edge server: equilibria, pricing and simulation."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    console.print(Panel.fit(
        "[bold blue]MEC Offloading Pricing[/bold blue]\n"
        "Nash and social equilibria, congestion pricing and queue simulation",
        border_style="blue"
    ))


@cli.command()
@common_options
def solve(scenario_path, out_dir, seed, fmt):
    """Solve Nash, social and priced equilibria for every user."""
    scenario = _safe_load(scenario_path, seed)
    _execute("Solving equilibria", out_dir, fmt,
             lambda m: cmd_solve(scenario, m, max_sweeps=settings.max_sweeps))


@cli.command()
@common_options
def converge(scenario_path, out_dir, seed, fmt):
    """Trace best-response convergence with no price, the optimal price, and socially."""
    scenario = _safe_load(scenario_path, seed)
    _execute("Running best-response dynamics", out_dir, fmt,
             lambda m: cmd_convergence(scenario, m, max_sweeps=settings.max_sweeps))


@cli.command()
@common_options
@click.option('--axis', type=click.Choice(['n', 'd']), required=True, help='Sweep users (n) or distance (d)')
def sweep(scenario_path, out_dir, seed, fmt, axis):
    """Sweep equilibria, profits, delays and price over a grid."""
    scenario = _safe_load(scenario_path, seed)
    _execute(f"Sweeping {axis}", out_dir, fmt,
             lambda m: cmd_sweep(scenario, axis, m, workers=settings.workers))


@cli.command()
@common_options
def delays(scenario_path, out_dir, seed, fmt):
    """Per-user delays at the Nash, social and priced equilibria."""
    scenario = _safe_load(scenario_path, seed)
    _execute("Computing delays", out_dir, fmt,
             lambda m: cmd_delays(scenario, m, max_sweeps=settings.max_sweeps))


@cli.command()
@common_options
@click.option('--points', type=int, default=None, help='Offload frequencies per curve (overrides the scenario)')
def utility(scenario_path, out_dir, seed, fmt, points):
    """Utility and demand curves over the offload frequency, one per distance."""
    scenario = _safe_load(scenario_path, seed)
    if points is not None:
        scenario = _safe(lambda: Scenario.model_validate(
            {**scenario.model_dump(), "experiment": {**scenario.experiment.model_dump(), "x_points": points}}
        ))
    _execute("Tracing utility curves", out_dir, fmt, lambda m: cmd_utility(scenario, m))



@cli.command()
@common_options
@click.option('--horizon', type=int, default=None, help='Simulated slots (overrides the scenario)')
@click.option('--replications', type=int, default=None, help='Number of seeds to simulate')
def simulate(scenario_path, out_dir, seed, fmt, horizon, replications):
    """Simulate the queues at the social equilibrium and compare with the formulas."""
    scenario = _safe_load(scenario_path, seed)
    updates = {}
    if horizon is not None:
        updates["horizon_slots"] = horizon
    elif not scenario_path:
        updates["horizon_slots"] = settings.sim_horizon_slots
    if replications is not None:
        updates["replications"] = replications
    if updates:
        scenario = _safe(lambda: Scenario.model_validate(
            {**scenario.model_dump(), "experiment": {**scenario.experiment.model_dump(), **updates}}
        ))
    _execute("Simulating queues", out_dir, fmt,
             lambda m: cmd_sim_validate(
                 scenario, m,
                 rel_tol=settings.validation_rel_tol,
                 max_sweeps=settings.max_sweeps,
                 warmup_fraction=settings.sim_warmup_fraction,
                 workers=settings.workers,
             ))


@cli.command()
@common_options
def run(scenario_path, out_dir, seed, fmt):
    """Run the experiment named in the scenario file."""
    scenario = _safe_load(scenario_path, seed)
    _execute(f"Running {scenario.experiment.kind}", out_dir, fmt,
             lambda m: run_experiment(
                 scenario, m,
                 workers=settings.workers,
                 max_sweeps=settings.max_sweeps,
                 rel_tol=settings.validation_rel_tol,
                 warmup_fraction=settings.sim_warmup_fraction,
             ))


@cli.command()
@click.argument('path', type=click.Path(dir_okay=False))
@click.option('--users', 'user_kind', type=click.Choice(['homogeneous', 'ring']), default='homogeneous')
@click.option('--experiment',
              type=click.Choice(['convergence', 'sweep_n', 'sweep_d', 'delays', 'sim_validate', 'utility']),
              default='convergence')
def scenario(path, user_kind, experiment):
    """Write a template scenario file with the default parameters."""
    base = default_scenario()
    users = HomogeneousUsers() if user_kind == 'homogeneous' else RingUsers()
    template = base.model_copy(update={
        "users": users,
        "experiment": base.experiment.model_copy(update={"kind": experiment}),
    })
    written = write_scenario(template, path)
    console.print(f"[green]Scenario template written to {written}[/green]")


def _safe(fn):
    try:
        return fn()
    except (ScenarioError, ValueError) as e:
        console.print(f"[bold red]Scenario error: {e}[/bold red]")
        sys.exit(EXIT_BAD_SCENARIO)


def _safe_load(scenario_path: Optional[str], seed: Optional[int]) -> Scenario:
    return _safe(lambda: _load(scenario_path, seed))


if __name__ == '__main__':
    cli()
