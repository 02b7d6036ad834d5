"""Tests for scenarios, result tables, experiment commands, the CLI and run monitoring."""

import json
import math

import pytest
from click.testing import CliRunner
from pydantic import ValidationError

from src.cli import cli
from src.config.settings import Settings, settings
from src.experiments.results import ResultTable
from src.experiments.runner import (
    cmd_convergence,
    cmd_delays,
    cmd_sim_validate,
    cmd_solve,
    cmd_sweep,
    cmd_utility,
    run_experiment,
)
from src.experiments.scenario import (
    ExperimentSpec,
    HomogeneousUsers,
    RingUsers,
    Scenario,
    dump_scenario,
    load_scenario,
    parse_scenario,
    write_scenario,
)
from src.model.exceptions import DomainError, ScenarioError
from src.model.parameters import SystemConfig
from src.monitoring.run_monitor import RunMonitor


def small_homogeneous(n=10, kind="convergence", system=None, **experiment) -> Scenario:
    return Scenario(
        system=system or SystemConfig(),
        users=HomogeneousUsers(n=n),
        experiment=ExperimentSpec(kind=kind, **experiment),
    )


def small_ring(n=8, kind="convergence", **experiment) -> Scenario:
    return Scenario(
        users=RingUsers(n=n, seed=1),
        experiment=ExperimentSpec(kind=kind, **experiment),
    )


class TestScenario:
    def test_toml_round_trip(self, tmp_path):
        scenario = small_ring(kind="delays", price_rule="exact")
        path = write_scenario(scenario, tmp_path / "ring.toml")
        assert load_scenario(path) == scenario

    def test_documented_example_parses(self):
        text = dump_scenario(Scenario(users=RingUsers()))
        scenario = parse_scenario(text)
        assert scenario.users.kind == "ring"
        assert len(scenario.population()) == 50

    @pytest.mark.parametrize("text", [
        "seed = -1",
        "[users]\nkind = \"square\"",
        "[users]\nkind = \"ring\"\nr_min = 80.0\nr_max = 20.0",
        "[system]\nlambda_a = 2000.0",
        "[experiment]\nhorizon_slots = 10\nwarmup_slots = 10",
        "not toml at all [",
        "[system]\nunknown = 1",
    ])
    def test_invalid_scenarios_rejected(self, text):
        with pytest.raises(ScenarioError):
            parse_scenario(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "absent.toml")

    def test_ring_distances_within_bounds_and_seeded(self):
        ring = RingUsers(n=200, r_min=10.0, r_max=75.0, seed=4)
        d = ring.distances()
        assert d.min() >= 10.0 and d.max() <= 75.0
        assert d.tolist() == RingUsers(n=200, seed=4).distances().tolist()

    def test_closed_forms_need_homogeneous_users(self):
        with pytest.raises(ScenarioError):
            small_ring().homogeneous()

    def test_with_seed_validates(self):
        assert small_homogeneous().with_seed(7).seed == 7
        with pytest.raises(ScenarioError):
            small_homogeneous().with_seed(2 ** 64)


class TestResultTable:
    def test_row_arity_checked(self):
        table = ResultTable.create("t", ["a", "b"], seed=1)
        with pytest.raises(DomainError):
            table.add_row(1, 2, 3)

    def test_missing_values_written_as_na(self, tmp_path):
        table = ResultTable.create("t", ["a", "b"], seed=1)
        table.add_row(1.5, math.nan)
        table.add_row(math.inf, 2)
        assert table.to_csv() == "a,b\n1.5,n/a\nn/a,2.0\n"
        path = table.write(tmp_path, "json", {"status": "ok"})
        rows = json.loads(path.read_text())["rows"]
        assert rows[0]["b"] is None
        meta = json.loads((tmp_path / "t.meta.json").read_text())
        assert meta["metadata"]["seed"] == 1
        assert meta["status"]["status"] == "ok"
        assert "version" in meta["metadata"]


class TestCommands:
    def test_convergence_matches_closed_form(self):
        scenario = small_homogeneous(n=100, system=SystemConfig(epsilon=1e-6))
        monitor = RunMonitor()
        table = cmd_convergence(scenario, monitor)
        rows = [r for r in table.rows if r[0] == "regulated_p0"]
        assert rows[-1][-1] == "converged"
        assert rows[-1][2] == pytest.approx(rows[-1][4], abs=1e-3)
        social = [r for r in table.rows if r[0] == "social"]
        assert social[-1][2] == pytest.approx(social[-1][4], abs=1e-3)
        assert monitor.status_summary()["status"] == "ok"

    def test_single_user_traces_coincide(self):
        table = cmd_convergence(small_homogeneous(n=1))
        finals = {}
        for game in ("regulated_p0", "regulated_optimal", "social"):
            rows = [r for r in table.rows if r[0] == game]
            assert rows[0][2] == pytest.approx(rows[-1][2], abs=1e-12)
            finals[game] = rows[-1][2]
        assert finals["regulated_p0"] == pytest.approx(finals["social"], abs=1e-9)
        assert table.metadata["price"] == 0.0

    def test_sweep_over_users(self):
        table = cmd_sweep(small_homogeneous(), "n")
        ratios = table.column("profit_ratio")
        assert table.column("n_users") == [1, 10, 50, 100, 200]
        assert ratios[0] == pytest.approx(1.0, abs=1e-9)
        assert all(r >= 1.0 - 1e-12 for r in ratios)
        assert all(a <= b + 1e-12 for a, b in zip(ratios, ratios[1:]))
        assert all(s == "ok" for s in table.column("status"))

    def test_sweep_over_distance(self):
        table = cmd_sweep(small_homogeneous(n=50), "d")
        x_ne, x_se = table.column("x_ne"), table.column("x_se")
        assert all(a >= b for a, b in zip(x_ne, x_ne[1:]))
        assert all(a >= b for a, b in zip(x_se, x_se[1:]))
        assert all(ne > se for ne, se in zip(x_ne, x_se))

    def test_sweep_flags_trivial_points(self):
        scenario = Scenario(
            system=SystemConfig(f_B=1e5),
            users=HomogeneousUsers(n=10),
            experiment=ExperimentSpec(kind="sweep_n", n_grid=[1, 10]),
        )
        table = cmd_sweep(scenario, "n")
        assert table.column("status") == ["trivial", "trivial"]
        assert table.column("x_ne") == [0.0, 0.0]

    def test_sweep_needs_homogeneous_users(self):
        with pytest.raises(ScenarioError):
            cmd_sweep(small_ring(), "n")

    def test_solve_on_ring(self):
        for rule in ("uniform", "exact"):
            table = cmd_solve(small_ring(price_rule=rule))
            assert len(table.rows) == 8
            assert sum(table.column("x_ne")) > sum(table.column("x_se"))
            assert all(p >= 0 for p in table.column("price"))

    def test_delays_have_na_when_nothing_offloaded(self):
        scenario = Scenario(system=SystemConfig(f_B=1e5), users=HomogeneousUsers(n=3))
        table = cmd_delays(scenario)
        assert all(math.isnan(v) for v in table.column("edge_delay_se"))
        assert all(v > 0 for v in table.column("local_delay_se"))

    def test_nonconvergence_is_flagged(self):
        scenario = small_homogeneous(n=50, system=SystemConfig(epsilon=1e-12))
        monitor = RunMonitor()
        table = cmd_convergence(scenario, monitor, max_sweeps=2)
        assert "nonconverged" in table.column("status")
        assert monitor.status_summary()["status"] == "failed"

    def test_dispatch(self):
        table = run_experiment(small_homogeneous(kind="sweep_d"))
        assert table.name == "sweep_d"
        assert run_experiment(small_homogeneous(kind="utility", x_points=5)).name == "utility"

    def test_utility_curves_are_ordered(self):
        table = cmd_utility(small_homogeneous(kind="utility", x_points=60))
        assert len(table.rows) == 4 * 60
        curves = {}
        for d, _, x, value, slope, x_up in table.rows:
            curves.setdefault(d, []).append((x, value, slope, x_up))
        assert sorted(curves) == [10.0, 30.0, 50.0, 70.0]
        for points in curves.values():
            x_up = points[0][3]
            assert 0 < x_up < 1
            assert points[0][:2] == (0.0, 0.0)
            rising = [value for x, value, _, _ in points if x <= x_up]
            assert all(b > a - 1e-12 for a, b in zip(rising, rising[1:]))
            slopes = [slope for _, _, slope, _ in points]
            assert all(b < a for a, b in zip(slopes, slopes[1:]))
        for near, far in zip(sorted(curves), sorted(curves)[1:]):
            for (x, u_near, _, _), (_, u_far, _, _) in zip(curves[near][1:], curves[far][1:]):
                assert u_near > u_far, (near, far, x)

    def test_utility_peaks_at_demand_root(self):
        table = cmd_utility(small_homogeneous(kind="utility", d_grid=[50.0], x_points=400))
        values, x_up = table.column("utility"), table.rows[0][-1]
        peak = table.column("x")[values.index(max(values))]
        assert peak == pytest.approx(x_up, abs=2 * 0.99 / 399)

    def test_sim_validate_in_parallel_matches_sequential(self):
        scenario = small_homogeneous(n=4, kind="sim_validate", horizon_slots=50_000, replications=3)
        sequential = cmd_sim_validate(scenario, workers=1, rel_tol=10.0)
        pooled = cmd_sim_validate(scenario, workers=2, rel_tol=10.0)
        assert pooled.column("seed")[::4] == [scenario.seed, scenario.seed + 1, scenario.seed + 2]
        assert pooled.to_csv() == sequential.to_csv()

    @pytest.mark.slow
    def test_uniform_price_convergence_on_ring(self):
        scenario = Scenario(
            system=SystemConfig(epsilon=1e-7),
            users=RingUsers(n=50, seed=0),
            experiment=ExperimentSpec(kind="convergence"),
        )
        table = cmd_convergence(scenario)
        finals = {}
        for game in ("regulated_optimal", "social"):
            rows = [r for r in table.rows if r[0] == game]
            assert rows[-1][-1] == "converged"
            finals[game] = rows[-1][2]
        assert finals["regulated_optimal"] == pytest.approx(finals["social"], abs=1e-3)


class TestCli:
    def write(self, tmp_path, scenario, name="scenario.toml"):
        return str(write_scenario(scenario, tmp_path / name))

    def test_solve_writes_table(self, tmp_path):
        path = self.write(tmp_path, small_homogeneous())
        out = tmp_path / "out"
        result = CliRunner().invoke(cli, ["solve", "--scenario", path, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "solve.csv").exists()
        assert json.loads((out / "solve.meta.json").read_text())["status"]["status"] == "ok"

    def test_converge_and_sweep(self, tmp_path):
        path = self.write(tmp_path, small_homogeneous())
        runner = CliRunner()
        out = tmp_path / "out"
        assert runner.invoke(cli, ["converge", "--scenario", path, "--out", str(out)]).exit_code == 0
        assert runner.invoke(cli, ["sweep", "--axis", "n", "--scenario", path, "--out", str(out),
                                   "--format", "json"]).exit_code == 0
        assert (out / "convergence.csv").exists()
        assert (out / "sweep_n.json").exists()

    def test_seeded_reruns_are_identical(self, tmp_path):
        path = self.write(tmp_path, small_ring(kind="delays"))
        runner = CliRunner()
        for name in ("a", "b"):
            result = runner.invoke(cli, ["run", "--scenario", path, "--seed", "5", "--out", str(tmp_path / name)])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a" / "delays.csv").read_bytes() == (tmp_path / "b" / "delays.csv").read_bytes()

    def test_simulate_writes_table(self, tmp_path, monkeypatch):
        scenario = Scenario(
            system=SystemConfig(f_B=1e5),
            users=HomogeneousUsers(n=5),
            experiment=ExperimentSpec(kind="sim_validate"),
        )
        path = self.write(tmp_path, scenario)
        out = tmp_path / "out"
        monkeypatch.setattr(settings, "validation_rel_tol", 10.0)
        monkeypatch.setattr(settings, "workers", 2)
        result = CliRunner().invoke(cli, ["simulate", "--scenario", path, "--horizon", "100000",
                                          "--replications", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        meta = json.loads((out / "sim_validate.meta.json").read_text())
        assert meta["status"]["status"] == "ok"
        assert meta["status"]["by_kind"]["simulation"]["total_runs"] == 2
        edge_rows = [line.split(",") for line in (out / "sim_validate.csv").read_text().splitlines()
                     if ",edge_sojourn," in line]
        assert len(edge_rows) == 2
        assert all(row[4] == "n/a" for row in edge_rows)

    def test_utility_command(self, tmp_path):
        path = self.write(tmp_path, small_homogeneous(kind="utility"))
        out = tmp_path / "out"
        result = CliRunner().invoke(cli, ["utility", "--scenario", path, "--points", "11", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "utility.csv").read_text().splitlines()
        assert lines[0] == "distance,snr,x,utility,demand,x_up"
        assert len(lines) == 1 + 4 * 11

    def test_status_shows_runs_by_kind(self, tmp_path):
        path = self.write(tmp_path, small_homogeneous())
        out = tmp_path / "out"
        result = CliRunner().invoke(cli, ["solve", "--scenario", path, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "Runs by Kind" in result.output
        by_kind = json.loads((out / "solve.meta.json").read_text())["status"]["by_kind"]
        assert by_kind["engine"]["total_runs"] == 3
        assert (by_kind["pricing"]["total_runs"], by_kind["pricing"]["failed_runs"]) == (1, 0)

    def test_unexpected_error_exit_code(self, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr("src.cli.cmd_solve", broken)
        result = CliRunner().invoke(cli, ["solve", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert not (tmp_path / "solve.csv").exists()

    def test_scenario_template(self, tmp_path):
        target = tmp_path / "template.toml"
        result = CliRunner().invoke(cli, ["scenario", str(target), "--users", "ring", "--experiment", "sweep_d"])
        assert result.exit_code == 0, result.output
        scenario = load_scenario(target)
        assert scenario.users.kind == "ring"
        assert scenario.experiment.kind == "sweep_d"

    def test_bad_scenario_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[users]\nkind = \"square\"\n")
        result = CliRunner().invoke(cli, ["solve", "--scenario", str(bad), "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_sweep_on_ring_exit_code(self, tmp_path):
        path = self.write(tmp_path, small_ring())
        result = CliRunner().invoke(cli, ["sweep", "--axis", "d", "--scenario", path, "--out", str(tmp_path)])
        assert result.exit_code == 2


class TestRunMonitor:
    def test_status_summary(self):
        monitor = RunMonitor()
        assert monitor.status_summary()["status"] == "empty"
        monitor.start_operation("a", "engine")
        monitor.end_operation("a", success=True, result_data={"sweeps": 4, "residual": 1e-9})
        status = monitor.status_summary()
        assert status["status"] == "ok"
        assert status["sweeps"] == 4
        monitor.start_operation("b", "engine")
        monitor.end_operation("b", success=False, error_info="SolverError: no bracket")
        status = monitor.status_summary()
        assert status["status"] == "failed"
        assert status["failures"][0]["operation_id"] == "b"
        assert monitor.get_real_time_stats()["by_kind"]["engine"]["failed_runs"] == 1

    def test_unknown_operation(self):
        assert RunMonitor().end_operation("missing", success=True) is None


class TestSettings:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("MEC_WORKERS", "3")
        monkeypatch.setenv("MEC_LOG_LEVEL", "debug")
        s = Settings()
        assert s.workers == 3
        assert s.log_level == "DEBUG"

    def test_invalid_values(self, monkeypatch):
        monkeypatch.setenv("MEC_LOG_LEVEL", "chatty")
        with pytest.raises(ValidationError):
            Settings()
