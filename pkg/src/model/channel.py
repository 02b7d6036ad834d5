"""
Wireless channel models for the offloading policy.

A job is offloaded when the instantaneous channel power gain |h|^2 exceeds
(e^beta - 1) / rho, so the offloading frequency is the exceedance probability
of the gain at that threshold. Any fading law works as long as it supplies
that exceedance function, its inverse, and a sampler for the simulator.
"""

import logging
import math
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from .exceptions import DomainError

if TYPE_CHECKING:
    from .parameters import SystemConfig

logger = logging.getLogger(__name__)

# Threshold reported for a user that never offloads (x = 0).
NEVER_OFFLOAD = math.inf


class ChannelModel(ABC):
    """Distribution of the small-scale channel power gain |h|^2."""

    name: str = "abstract"

    @abstractmethod
    def ccdf(self, z: float) -> float:
        """Pr(|h|^2 > z)."""

    @abstractmethod
    def inverse_ccdf(self, p: float) -> float:
        """Gain threshold whose exceedance probability is p, for 0 < p <= 1."""

    @abstractmethod
    def inverse_ccdf_derivative(self, p: float) -> float:
        """Derivative of inverse_ccdf with respect to p (negative)."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` independent gains."""


class RayleighChannel(ChannelModel):
    """Rayleigh fading: |h|^2 ~ exp(1)."""

    name = "rayleigh"

    def ccdf(self, z: float) -> float:
        return math.exp(-z)

    def inverse_ccdf(self, p: float) -> float:
        return -math.log(p)

    def inverse_ccdf_derivative(self, p: float) -> float:
        return -1.0 / p

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0, size=size)


class NakagamiChannel(ChannelModel):
    """Nakagami-m fading: |h|^2 ~ Gamma(m, 1/m), unit mean. m = 1 is Rayleigh."""

    name = "nakagami"

    def __init__(self, m: float):
        if m <= 0:
            raise DomainError(f"Nakagami shape must be positive, got {m}")
        self.m = m
        self._log_norm = m * math.log(m) - special.gammaln(m)

    def ccdf(self, z: float) -> float:
        return float(special.gammaincc(self.m, self.m * z))

    def inverse_ccdf(self, p: float) -> float:
        return float(special.gammainccinv(self.m, p)) / self.m

    def _pdf(self, z: float) -> float:
        if z <= 0:
            return math.inf if self.m < 1 else (1.0 if self.m == 1 else 0.0)
        return math.exp(self._log_norm + (self.m - 1.0) * math.log(z) - self.m * z)

    def inverse_ccdf_derivative(self, p: float) -> float:
        density = self._pdf(self.inverse_ccdf(p))
        if density == 0.0:
            return -math.inf
        return -1.0 / density

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.gamma(self.m, 1.0 / self.m, size=size)


@lru_cache(maxsize=32)
def channel_for(kind: str, m: float = 1.0) -> ChannelModel:
    """Shared channel instances, keyed by the scenario's channel settings."""
    if kind == "rayleigh":
        return RayleighChannel()
    if kind == "nakagami":
        return NakagamiChannel(m)
    raise DomainError(f"Unknown channel kind '{kind}'")


RAYLEIGH = channel_for("rayleigh")


def snr_from_distance(d: float, cfg: "SystemConfig") -> float:
    """Received SNR d^-alpha * P_t / sigma^2."""
    if d <= 0:
        raise DomainError(f"Distance must be positive, got {d}")
    return d ** (-cfg.alpha) * cfg.P_t / cfg.sigma2


def frequency_from_threshold(beta: float, rho: float, ch: ChannelModel = RAYLEIGH) -> float:
    """Offloading frequency produced by rate threshold `beta` (nats)."""
    if beta < 0 or math.isnan(beta):
        raise DomainError(f"Rate threshold must be non-negative, got {beta}")
    if rho <= 0:
        raise DomainError(f"SNR must be positive, got {rho}")
    if math.isinf(beta):
        return 0.0
    return ch.ccdf(math.expm1(beta) / rho)


def threshold_from_frequency(x: float, rho: float, ch: ChannelModel = RAYLEIGH) -> float:
    """Rate threshold that yields offloading frequency `x`; NEVER_OFFLOAD for x = 0."""
    if x < 0 or x > 1 or math.isnan(x):
        raise DomainError(f"Offloading frequency must lie in [0, 1], got {x}")
    if rho <= 0:
        raise DomainError(f"SNR must be positive, got {rho}")
    if x == 0:
        return NEVER_OFFLOAD
    if x == 1:
        return 0.0
    return math.log1p(rho * ch.inverse_ccdf(x))


def threshold_derivative(x: float, rho: float, ch: ChannelModel = RAYLEIGH) -> float:
    """d beta / d x on the open interval (0, 1)."""
    if not 0 < x < 1:
        raise DomainError(f"Threshold derivative needs 0 < x < 1, got {x}")
    return rho * ch.inverse_ccdf_derivative(x) / (1.0 + rho * ch.inverse_ccdf(x))
