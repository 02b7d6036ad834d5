"""Validated system-wide and per-user parameters of the offloading model."""

import logging
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .channel import ChannelModel, channel_for, snr_from_distance
from .exceptions import InfeasibleError

logger = logging.getLogger(__name__)


class ChannelSpec(BaseModel):
    """Which fading law the channel gain follows."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["rayleigh", "nakagami"] = "rayleigh"
    m: float = Field(1.0, gt=0)

    def build(self) -> ChannelModel:
        return channel_for(self.kind, self.m)


class SystemConfig(BaseModel):
    """
    Global physical and economic parameters.

    Defaults are the numerical study's homogeneous scenario: 1 ms slots,
    0.6 jobs/s, 100 M cycles per job, 100 nats per job, 100 mW transmit power,
    -40 dBm noise, path loss exponent 3.5 and a 3 GHz edge server.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    t0: float = Field(1e-3, gt=0, description="slot length (s)")
    lambda_a: float = Field(0.6, gt=0, description="job arrival rate (jobs/s)")
    mu_a: float = Field(1e8, gt=0, description="mean CPU cycles per job")
    la_mua: float = Field(100.0, gt=0, description="offload data per job (nats)")
    P_t: float = Field(0.1, gt=0, description="transmit power (W)")
    sigma2: float = Field(1e-7, gt=0, description="noise power (W)")
    alpha: float = Field(3.5, gt=0, description="path-loss exponent")
    f_B: float = Field(3e9, gt=0, description="edge CPU speed (cycles/s)")
    rate_unit_scale: Optional[float] = Field(
        None, gt=0, description="seconds of airtime per unit of la_mua/beta; defaults to t0"
    )
    price: float = Field(0.0, ge=0, description="unit offloading price")
    epsilon: float = Field(1e-3, gt=0, description="best-response stop threshold")
    n_users: int = Field(1, ge=1)
    channel: ChannelSpec = Field(default_factory=ChannelSpec)

    @model_validator(mode="after")
    def _arrival_probability_below_one(self) -> "SystemConfig":
        if self.lambda_a * self.t0 >= 1:
            raise ValueError(
                f"arrival probability per slot lambda_a*t0={self.lambda_a * self.t0} must be < 1"
            )
        return self

    @property
    def mu_B(self) -> float:
        """Edge service rate (jobs/s)."""
        return self.f_B / self.mu_a

    @property
    def p_a(self) -> float:
        """Arrival probability per slot."""
        return self.lambda_a * self.t0

    @property
    def airtime_scale(self) -> float:
        return self.rate_unit_scale if self.rate_unit_scale is not None else self.t0

    @property
    def channel_model(self) -> ChannelModel:
        return self.channel.build()


class UserProfile(BaseModel):
    """
    Per-user parameters.

    The SNR is either given directly (`rho`) or derived from the distance `d`.
    When both are present, `rho` wins and `d` serves as the reference distance
    for `at_distance`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    d: Optional[float] = Field(None, gt=0, description="distance to the AP (m)")
    rho: Optional[float] = Field(None, gt=0, description="received SNR override")
    c_t: float = Field(0.9, gt=0, lt=1, description="delay weight (1/s)")
    c_e: float = Field(0.1, gt=0, lt=1, description="energy weight (1/J)")
    f_m: float = Field(1e8, gt=0, description="local CPU speed (cycles/s)")
    kappa_m: float = Field(1e-26, gt=0, description="chip energy coefficient")

    @model_validator(mode="after")
    def _needs_distance_or_snr(self) -> "UserProfile":
        if self.d is None and self.rho is None:
            raise ValueError("a user profile needs a distance d or an SNR override rho")
        return self

    def snr(self, cfg: SystemConfig) -> float:
        if self.rho is not None:
            return self.rho
        return snr_from_distance(self.d, cfg)

    def mu_m(self, cfg: SystemConfig) -> float:
        """Local service rate (jobs/s)."""
        return self.f_m / cfg.mu_a

    def local_energy(self, cfg: SystemConfig) -> float:
        """Energy per locally executed job (J)."""
        return self.kappa_m * self.f_m ** 2 * cfg.mu_a

    def check_stable(self, cfg: SystemConfig) -> None:
        """The local queue must be stable even when nothing is offloaded."""
        mu_m = self.mu_m(cfg)
        if mu_m <= cfg.lambda_a:
            raise InfeasibleError(
                f"local service rate {mu_m:.6g} jobs/s does not exceed arrival rate {cfg.lambda_a:.6g}"
            )

    def at_distance(self, d: float, cfg: SystemConfig) -> "UserProfile":
        """Same user moved to distance `d`, keeping any SNR calibration."""
        if self.rho is not None and self.d is not None:
            scaled = self.rho * (d / self.d) ** (-cfg.alpha)
            return self.model_copy(update={"d": d, "rho": scaled})
        return self.model_copy(update={"d": d, "rho": None})
