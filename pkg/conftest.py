"""Shared fixtures for the offloading model, solver, engine and simulation tests."""

import numpy as np
import pytest

from src.equilibrium.homogeneous import HomogeneousScenario
from src.experiments.scenario import RingUsers
from src.model.parameters import SystemConfig, UserProfile


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs (still part of the default run)")


@pytest.fixture
def cfg() -> SystemConfig:
    """Numerical-study system parameters (mu_B = 30 jobs/s)."""
    return SystemConfig()


@pytest.fixture
def profile() -> UserProfile:
    """Calibrated user at 50 m with SNR 0.89."""
    return UserProfile(d=50.0, rho=0.89)


@pytest.fixture
def homogeneous(cfg, profile):
    def make(n: int, **cfg_updates) -> HomogeneousScenario:
        system = cfg.model_copy(update={"n_users": n, **cfg_updates})
        return HomogeneousScenario(n_users=n, profile=profile, cfg=system)
    return make


@pytest.fixture
def ring_population(cfg, profile):
    """Users on a 10-75 m ring, SNR scaled from the 50 m calibration."""
    def make(seed: int, n: int = 50):
        ring = RingUsers(n=n, r_min=10.0, r_max=75.0, seed=seed, profile=profile)
        return [profile.at_distance(float(d), cfg) for d in ring.distances()]
    return make


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
