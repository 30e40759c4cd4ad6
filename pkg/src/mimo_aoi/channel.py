"""Zero-forcing outage model for the symmetric uplink.

With ``k`` of the ``N`` receive antennas' degrees of freedom spent on
separating ``k`` simultaneous streams, each stream's post-processing SNR is
Gamma(N-k+1) distributed, so the per-stream outage probability is the upper
tail of a Poisson variable:

    P_e(k) = 1 - sum_{i=0}^{N-k} x**i / i! * exp(-x),   x = gamma_th * d**tau / snr
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mimo_aoi.errors import ConfigError


@dataclass(frozen=True)
class ChannelConfig:
    """Physical link parameters shared by every device (symmetric topology)."""

    num_devices: int
    num_antennas: int
    snr_linear: float
    distance: float = 1.0
    path_loss_exponent: float = 2.0
    snr_threshold: float = 1.0

    def __post_init__(self):
        if int(self.num_devices) != self.num_devices or self.num_devices < 1:
            raise ConfigError(f"num_devices must be a positive integer, got {self.num_devices!r}")
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise ConfigError(f"num_antennas must be a positive integer, got {self.num_antennas!r}")
        if self.num_antennas < self.num_devices:
            raise ConfigError(
                f"need num_antennas >= num_devices, got N={self.num_antennas} < K={self.num_devices}"
            )
        if not self.snr_linear > 0:
            raise ConfigError(f"snr_linear must be positive, got {self.snr_linear!r}")
        if not self.distance > 0:
            raise ConfigError(f"distance must be positive, got {self.distance!r}")
        if not self.path_loss_exponent >= 0:
            raise ConfigError(f"path_loss_exponent must be nonnegative, got {self.path_loss_exponent!r}")
        if not self.snr_threshold > 0:
            raise ConfigError(f"snr_threshold must be positive, got {self.snr_threshold!r}")


def effective_noise_ratio(cfg: ChannelConfig) -> float:
    """Return ``gamma_th * sigma^2 / (P * Omega)`` with ``Omega = d**-tau``."""
    return cfg.snr_threshold * cfg.distance ** cfg.path_loss_exponent / cfg.snr_linear


def poisson_tail(x: float, n: int) -> float:
    """Probability that a Poisson(x) variable exceeds ``n``."""
    if x == 0.0:
        return 0.0
    term = math.exp(-x)
    cdf = term
    for i in range(n):
        term *= x / (i + 1)
        cdf += term
    return min(1.0, max(0.0, 1.0 - cdf))


def error_probability(cfg: ChannelConfig, k: int) -> float:
    """Per-stream outage probability when ``k`` devices transmit together."""
    if not 1 <= k <= cfg.num_devices:
        raise ValueError(f"k must lie in [1, {cfg.num_devices}], got {k}")
    return poisson_tail(effective_noise_ratio(cfg), cfg.num_antennas - k)


def build_outage_table(cfg: ChannelConfig) -> np.ndarray:
    """Outage probabilities indexed by the number of scheduled devices.

    Entry 0 is 0 by convention (an idle slot has nothing to lose).
    """
    table = np.zeros(cfg.num_devices + 1)
    for k in range(1, cfg.num_devices + 1):
        table[k] = error_probability(cfg, k)
    return table

