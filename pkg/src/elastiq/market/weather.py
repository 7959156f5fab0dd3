"""Seeded weather: sinusoidal temperature plus AR(1) noise; humidity and dew point derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..dataio import PERIODS_PER_DAY
from ..errors import ConfigurationError

# Magnus coefficients over water
MAGNUS_B = 17.62
MAGNUS_C = 243.12


@dataclass
class WeatherSpec:
    temp_mean: float = 27.0
    daily_amp: float = 6.0
    peak_period: int = 62  # within-day slot of the daily maximum, 0-based
    seasonal_amp: float = 2.0
    seasonal_days: float = 365.0
    noise_sigma: float = 0.15
    noise_persistence: float = 0.98
    rh_mean: float = 60.0
    rh_per_degree: float = -2.0
    rh_noise: float = 3.0
    seed: int = 1

    def __post_init__(self):
        if self.daily_amp < 0 or self.noise_sigma < 0 or self.rh_noise < 0:
            raise ConfigurationError("weather amplitudes and noise levels must be >= 0")
        if not 0.0 <= self.noise_persistence < 1.0:
            raise ConfigurationError("noise_persistence must lie in [0, 1)")


@dataclass
class WeatherSeries:
    temp_c: np.ndarray
    rh_pct: np.ndarray
    dewpoint_c: np.ndarray


def dewpoint(temp_c, rh_pct) -> np.ndarray:
    """Magnus-formula dew point (deg C)."""
    gamma = np.log(np.asarray(rh_pct) / 100.0) + MAGNUS_B * temp_c / (MAGNUS_C + temp_c)
    return MAGNUS_C * gamma / (MAGNUS_B - gamma)


def synth_weather(spec: WeatherSpec, days: int, start_day_of_year: int = 0) -> WeatherSeries:
    if days < 1:
        raise ConfigurationError("days must be >= 1")
    n = days * PERIODS_PER_DAY
    rng = np.random.default_rng(spec.seed)
    t = np.arange(n)
    slot = t % PERIODS_PER_DAY
    daily = spec.daily_amp * np.cos(2 * np.pi * (slot - spec.peak_period) / PERIODS_PER_DAY)
    day = start_day_of_year + t / PERIODS_PER_DAY
    seasonal = spec.seasonal_amp * np.sin(2 * np.pi * day / spec.seasonal_days)
    noise = lfilter([spec.noise_sigma], [1.0, -spec.noise_persistence], rng.standard_normal(n))
    temp = spec.temp_mean + daily + seasonal + noise
    rh = spec.rh_mean + spec.rh_per_degree * (temp - spec.temp_mean) + spec.rh_noise * rng.standard_normal(n)
    rh = np.clip(rh, 5.0, 100.0)
    return WeatherSeries(temp, rh, dewpoint(temp, rh))
