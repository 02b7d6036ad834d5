"""Tests for the closed-form homogeneous Nash / social solvers and the optimal price."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.equilibrium.homogeneous import (
    HomogeneousScenario,
    existence_margin,
    ne_exists,
    optimal_price_homogeneous,
    solve_ne_homogeneous,
    solve_se_homogeneous,
)
from src.equilibrium.results import EquilibriumKind
from src.model.costs import demand, profits
from src.model.parameters import SystemConfig, UserProfile

GRID_STEP = 1e-6


def grid_oracle(s: HomogeneousScenario, coupled: int) -> float:
    """First 1e-6 grid cell where N lam x + sqrt(c_t (mu_B - m lam x) / g(x)) reaches mu_B (Rayleigh)."""
    cfg, u, n = s.cfg, s.profile, s.n_users
    rho = u.rho
    x = np.arange(1, int(1 / GRID_STEP)) * GRID_STEP
    mu_m = u.f_m / cfg.mu_a
    mu_b = cfg.f_B / cfg.mu_a
    energy = u.kappa_m * u.f_m ** 2 * cfg.mu_a
    eta = (u.c_t + u.c_e * cfg.P_t) * cfg.la_mua * cfg.t0
    inner = 1.0 - rho * np.log(x)
    beta = np.log(inner)
    beta_prime = -rho / (x * inner)
    g = (
        u.c_e * energy
        - eta / beta
        + eta * beta_prime * x / beta ** 2
        + u.c_t * mu_m / (mu_m - cfg.lambda_a * (1 - x)) ** 2
    )
    spare = mu_b - coupled * cfg.lambda_a * x
    phi = np.full_like(x, np.inf)
    ok = (g > 0) & (spare > 0)
    phi[ok] = n * cfg.lambda_a * x[ok] + np.sqrt(u.c_t * spare[ok] / g[ok])
    i = int(np.argmax(phi >= mu_b))
    return float(x[i] - GRID_STEP / 2)


class TestExistence:
    def test_default_scenario_has_positive_equilibria(self, homogeneous):
        s = homogeneous(100)
        assert existence_margin(s) == pytest.approx(5.626 - 0.03, abs=1e-12)
        assert ne_exists(s)

    def test_tiny_edge_server(self, homogeneous):
        assert not ne_exists(homogeneous(10, f_B=1e5))

    def test_boundary_counts_as_no_equilibrium(self):
        # powers of two keep g(0+) = c_t / mu_B = 4 exact
        cfg = SystemConfig(lambda_a=0.5, mu_a=2 ** 27, f_B=2 ** 24, n_users=3)
        u = UserProfile(rho=0.89, c_t=0.5, c_e=0.5, f_m=2 ** 27, kappa_m=2.0 ** -79)
        s = HomogeneousScenario(n_users=3, profile=u, cfg=cfg)
        assert existence_margin(s) == 0.0
        assert not ne_exists(s)

    def test_user_count_must_match_config(self):
        u = UserProfile(rho=0.89)
        with pytest.raises(ValidationError):
            HomogeneousScenario(n_users=3, profile=u, cfg=SystemConfig(n_users=4))
        assert HomogeneousScenario(n_users=3, profile=u).cfg.n_users == 3

    def test_trivial_equilibria_are_flagged(self, homogeneous):
        s = homogeneous(10, f_B=1e5)
        for solve in (solve_ne_homogeneous, solve_se_homogeneous):
            result = solve(s)
            assert result.trivial
            assert np.all(result.x_star.x == 0)
        assert optimal_price_homogeneous(s) == 0.0


class TestClosedForm:
    @pytest.mark.parametrize("n", [1, 10, 100, 200])
    def test_matches_grid_oracle(self, homogeneous, n):
        s = homogeneous(n)
        ne = solve_ne_homogeneous(s)
        se = solve_se_homogeneous(s)
        assert ne.x_star[0] == pytest.approx(grid_oracle(s, n - 1), abs=1e-5)
        assert se.x_star[0] == pytest.approx(grid_oracle(s, 0), abs=1e-5)

    @pytest.mark.parametrize("n", [1, 10, 50, 100, 200])
    def test_result_structure(self, homogeneous, n):
        s = homogeneous(n)
        for result, kind in ((solve_ne_homogeneous(s), EquilibriumKind.NE),
                             (solve_se_homogeneous(s), EquilibriumKind.SE)):
            assert result.kind == kind
            assert not result.trivial
            assert np.all(result.x_star.x == result.x_star.x[0])
            assert result.residual < 1e-8
            assert n * s.cfg.lambda_a * result.x_star[0] < s.cfg.mu_B

    def test_single_user_ne_equals_se(self, homogeneous):
        s = homogeneous(1)
        assert solve_ne_homogeneous(s).x_star[0] == pytest.approx(solve_se_homogeneous(s).x_star[0], abs=1e-12)

    @pytest.mark.parametrize("n", [2, 10, 50, 100, 200])
    def test_selfish_users_offload_more(self, homogeneous, n):
        s = homogeneous(n)
        assert solve_ne_homogeneous(s).x_star[0] > solve_se_homogeneous(s).x_star[0]

    def test_frequencies_non_increasing_in_users(self, homogeneous):
        ne = [solve_ne_homogeneous(homogeneous(n)).x_star[0] for n in (1, 10, 50, 100, 200)]
        se = [solve_se_homogeneous(homogeneous(n)).x_star[0] for n in (1, 10, 50, 100, 200)]
        assert all(a >= b for a, b in zip(ne, ne[1:]))
        assert all(a >= b for a, b in zip(se, se[1:]))

    def test_frequencies_non_increasing_in_distance(self, cfg, profile):
        system = cfg.model_copy(update={"n_users": 50})
        ne, se = [], []
        for d in (10.0, 30.0, 50.0, 70.0):
            s = HomogeneousScenario(n_users=50, profile=profile.at_distance(d, system), cfg=system)
            ne.append(solve_ne_homogeneous(s).x_star[0])
            se.append(solve_se_homogeneous(s).x_star[0])
        assert all(a >= b for a, b in zip(ne, ne[1:]))
        assert all(a >= b for a, b in zip(se, se[1:]))

    def test_social_profit_dominates(self, homogeneous):
        s = homogeneous(100)
        users = s.users()
        p_ne = profits(solve_ne_homogeneous(s).x_star, users, s.cfg)
        p_se = profits(solve_se_homogeneous(s).x_star, users, s.cfg)
        assert p_se.sum() >= p_ne.sum()
        assert np.all(p_se >= p_ne)


class TestOptimalPrice:
    def test_single_user_pays_nothing(self, homogeneous):
        assert optimal_price_homogeneous(homogeneous(1)) == 0.0

    def test_price_formula(self, homogeneous):
        s = homogeneous(100)
        x_bar = solve_se_homogeneous(s).x_star[0]
        expected = 99 * s.cfg.lambda_a * x_bar * demand(x_bar, s.profile, s.cfg) / s.cfg.mu_B
        price = optimal_price_homogeneous(s)
        assert price > 0
        assert price == pytest.approx(expected, rel=1e-12)
