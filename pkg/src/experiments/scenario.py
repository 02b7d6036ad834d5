"""
Scenario files: one TOML document describing the system, the user population
and the experiment to run.

    seed = 2019

    [system]
    lambda_a = 0.6
    epsilon = 0.001

    [users]
    kind = "ring"          # or "homogeneous"
    n = 50
    r_min = 10.0
    r_max = 75.0
    [users.profile]
    d = 50.0
    rho = 0.89

    [experiment]
    kind = "convergence"   # sweep_n | sweep_d | delays | sim_validate
"""

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..equilibrium.homogeneous import HomogeneousScenario
from ..model.exceptions import ScenarioError
from ..model.parameters import SystemConfig, UserProfile

logger = logging.getLogger(__name__)

# Numerical-study calibration: SNR 0.89 at 50 m.
DEFAULT_PROFILE = UserProfile(d=50.0, rho=0.89)


class HomogeneousUsers(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["homogeneous"] = "homogeneous"
    n: int = Field(100, ge=1)
    profile: UserProfile = DEFAULT_PROFILE


class RingUsers(BaseModel):
    """Users placed at distances drawn uniformly from [r_min, r_max]."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["ring"] = "ring"
    n: int = Field(50, ge=1)
    r_min: float = Field(10.0, gt=0)
    r_max: float = Field(75.0, gt=0)
    seed: int = Field(0, ge=0)
    profile: UserProfile = DEFAULT_PROFILE

    @model_validator(mode="after")
    def _ordered_radii(self) -> "RingUsers":
        if not self.r_min < self.r_max:
            raise ValueError(f"ring needs r_min < r_max, got {self.r_min} and {self.r_max}")
        return self

    def distances(self) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(self.seed))
        return rng.uniform(self.r_min, self.r_max, size=self.n)


UserSpec = Annotated[Union[HomogeneousUsers, RingUsers], Field(discriminator="kind")]

ExperimentKind = Literal["convergence", "sweep_n", "sweep_d", "delays", "sim_validate", "utility"]


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ExperimentKind = "convergence"
    n_grid: List[int] = Field(default_factory=lambda: [1, 10, 50, 100, 200])
    d_grid: List[float] = Field(default_factory=lambda: [10.0, 30.0, 50.0, 70.0])
    # grid points per utility curve on [0, 0.99]
    x_points: int = Field(100, ge=2)
    horizon_slots: int = Field(10_000_000, ge=1)
    warmup_slots: Optional[int] = Field(None, ge=0)
    replications: int = Field(1, ge=1)
    # heterogeneous populations: one shared price, or each user's exact externality
    price_rule: Literal["uniform", "exact"] = "uniform"

    @model_validator(mode="after")
    def _grids(self) -> "ExperimentSpec":
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid must be a non-empty list of positive user counts")
        if not self.d_grid or any(d <= 0 for d in self.d_grid):
            raise ValueError("d_grid must be a non-empty list of positive distances")
        if self.warmup_slots is not None and self.warmup_slots >= self.horizon_slots:
            raise ValueError("warmup_slots must be smaller than horizon_slots")
        return self


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(2019, ge=0, lt=2 ** 64)
    system: SystemConfig = Field(default_factory=SystemConfig)
    users: UserSpec = Field(default_factory=HomogeneousUsers)
    experiment: ExperimentSpec = Field(default_factory=ExperimentSpec)

    @property
    def is_homogeneous(self) -> bool:
        return isinstance(self.users, HomogeneousUsers)

    def population(self) -> List[UserProfile]:
        if isinstance(self.users, HomogeneousUsers):
            return [self.users.profile] * self.users.n
        template = self.users.profile
        return [template.at_distance(float(d), self.system) for d in self.users.distances()]

    def effective_config(self) -> SystemConfig:
        return self.system.model_copy(update={"n_users": self.users.n})

    def homogeneous(self, n: Optional[int] = None, profile: Optional[UserProfile] = None) -> HomogeneousScenario:
        if not isinstance(self.users, HomogeneousUsers):
            raise ScenarioError("closed-form solvers need a homogeneous user population")
        n = self.users.n if n is None else n
        return HomogeneousScenario(
            n_users=n,
            profile=profile or self.users.profile,
            cfg=self.system.model_copy(update={"n_users": n}),
        )

    def with_seed(self, seed: int) -> "Scenario":
        try:
            return Scenario.model_validate({**self.model_dump(), "seed": seed})
        except ValidationError as e:
            raise ScenarioError(f"invalid seed {seed}: {e}") from e


def default_scenario() -> Scenario:
    return Scenario()


def parse_scenario(text: str) -> Scenario:
    try:
        return Scenario.model_validate(tomllib.loads(text))
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"scenario is not valid TOML: {e}") from e
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario:\n{e}") from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    scenario = parse_scenario(text)
    logger.info(f"loaded scenario {path}: {scenario.users.kind} users, {scenario.experiment.kind}")
    return scenario


def dump_scenario(scenario: Scenario) -> str:
    return tomli_w.dumps(scenario.model_dump(mode="json", exclude_none=True))


def write_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_scenario(scenario), encoding="utf-8")
    return path
