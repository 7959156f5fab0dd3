"""Synthetic real-time prices: diurnal mean level, log-OU deviations, single-period spikes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ..dataio import PERIODS_PER_DAY
from ..errors import ConfigurationError


def default_diurnal() -> np.ndarray:
    """Positive 96-slot shape with a morning shoulder and an evening peak, mean close to 1."""
    s = np.arange(PERIODS_PER_DAY, dtype=float)
    shape = 0.8 + 0.12 * np.exp(-(((s - 32) / 8.0) ** 2)) + 0.45 * np.exp(-(((s - 70) / 10.0) ** 2))
    return shape / shape.mean()


@dataclass
class PriceProcessSpec:
    mean: float = 40.0
    reversion: float = 0.05
    volatility: float = 0.04
    spike_intensity: float = 0.0035
    spike_log_mean: float = 1.1
    spike_log_sigma: float = 0.3
    # iid log-price noise on top of the OU deviation (short-lived price jitter)
    noise: float = 0.0
    diurnal: np.ndarray = field(default_factory=default_diurnal)
    seed: int = 0

    def __post_init__(self):
        self.diurnal = np.asarray(self.diurnal, dtype=float)
        if not self.mean > 0:
            raise ConfigurationError("price mean must be > 0")
        if not 0.0 <= self.spike_intensity <= 1.0:
            raise ConfigurationError("spike_intensity must lie in [0, 1]")
        if not 0.0 <= self.reversion <= 1.0:
            raise ConfigurationError("reversion must lie in [0, 1]")
        if self.volatility < 0 or self.spike_log_sigma < 0 or self.noise < 0:
            raise ConfigurationError("volatility, noise and spike_log_sigma must be >= 0")
        if self.diurnal.shape != (PERIODS_PER_DAY,) or not np.all(self.diurnal > 0):
            raise ConfigurationError("diurnal must be 96 positive multipliers")


@dataclass
class PriceSeries:
    prices: np.ndarray
    spikes: np.ndarray  # bool, injected spike periods


def synth_prices(spec: PriceProcessSpec, days: int) -> PriceSeries:
    """``price_t = mean * diurnal[slot] * exp(x_t + noise_t) * spike_t`` with ``x`` a discrete OU process from 0."""
    if days < 1:
        raise ConfigurationError("days must be >= 1")
    n = days * PERIODS_PER_DAY
    rng = np.random.default_rng(spec.seed)
    eps = rng.standard_normal(n)
    hits = rng.random(n) < spec.spike_intensity
    mags = np.exp(spec.spike_log_mean + spec.spike_log_sigma * rng.standard_normal(n))
    jitter = spec.noise * rng.standard_normal(n)
    shocks = spec.volatility * eps
    shocks[0] = 0.0
    x = lfilter([1.0], [1.0, spec.reversion - 1.0], shocks)
    level = spec.mean * np.tile(spec.diurnal, days)
    prices = level * np.exp(x + jitter)
    prices = np.where(hits, prices * mags, prices)
    return PriceSeries(prices, hits)
