"""Rolling price forecaster: AR on diurnal deviations plus a post-spike elevation regime.

Prices at or above the spike threshold (a quantile of the fitting window) are
winsorised to the threshold before entering the AR recursion.  After a spike
observed ``age`` periods ago the whole forecast vector is multiplied by
``factor ** (0.5 ** (age / half_life))``: the full factor right at the spike,
its square root one half-life later, and so on towards 1.  This reproduces a
forecaster that keeps overestimating prices for a while after a spike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataio import PERIODS_PER_DAY
from ..errors import ConfigurationError

ELEVATION_CUTOFF = 1e-6


@dataclass
class ForecasterSpec:
    ar_order: int = 4
    horizon: int = 8
    spike_quantile: float = 0.95
    elevation_factor: float = 1.0
    half_life: float = 4.0

    def __post_init__(self):
        if self.ar_order < 1 or self.horizon < 1:
            raise ConfigurationError("ar_order and horizon must be >= 1")
        if not 0.0 < self.spike_quantile < 1.0:
            raise ConfigurationError("spike_quantile must lie in (0, 1)")
        if self.elevation_factor < 1.0:
            raise ConfigurationError("elevation_factor must be >= 1")
        if not self.half_life > 0:
            raise ConfigurationError("half_life must be > 0")


@dataclass
class ForecasterState:
    coeffs: np.ndarray
    profile: np.ndarray
    threshold: float
    elevation_factor: float = 1.0
    half_life: float = 4.0
    horizon: int = 8

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def max_age(self) -> int:
        """Largest spike age whose elevation still exceeds ``1 + 1e-6``."""
        if self.elevation_factor <= 1.0:
            return -1
        # factor ** (0.5 ** (a / h)) > 1 + c  <=>  a < h * log2(log(factor) / log1p(c))
        bound = self.half_life * math.log2(math.log(self.elevation_factor) / math.log1p(ELEVATION_CUTOFF))
        return max(int(math.ceil(bound)) - 1, 0)

    def elevation(self, age: int | None) -> float:
        if age is None or age < 0 or self.elevation_factor <= 1.0:
            return 1.0
        e = self.elevation_factor ** (0.5 ** (age / self.half_life))
        return e if e > 1.0 + ELEVATION_CUTOFF else 1.0


def fit_forecaster(prices: np.ndarray, spec: ForecasterSpec | None = None) -> ForecasterState:
    """Fit profile, threshold and AR coefficients on a history starting at slot 0."""
    spec = spec or ForecasterSpec()
    prices = np.asarray(prices, dtype=float)
    if len(prices) < max(PERIODS_PER_DAY, 4 * spec.ar_order):
        raise ConfigurationError("forecaster needs at least one day of history")
    threshold = float(np.quantile(prices, spec.spike_quantile))
    w = np.minimum(prices, threshold)
    slots = np.arange(len(prices)) % PERIODS_PER_DAY
    profile = np.bincount(slots, weights=w, minlength=PERIODS_PER_DAY) / np.bincount(
        slots, minlength=PERIODS_PER_DAY
    )
    d = w - profile[slots]
    p = spec.ar_order
    X = np.column_stack([d[p - 1 - i : len(d) - 1 - i] for i in range(p)])
    y = d[p:]
    coeffs, *_ = np.linalg.lstsq(X, y, rcond=None)
    return ForecasterState(coeffs, profile, threshold, spec.elevation_factor, spec.half_life, spec.horizon)


def spike_age(history: np.ndarray, t: int, state: ForecasterState) -> int | None:
    """Periods since the latest price at or above threshold within the elevation window."""
    if state.max_age < 0:
        return None
    lo = max(0, t - state.max_age)
    hits = np.flatnonzero(history[lo : t + 1] >= state.threshold)
    if len(hits) == 0:
        return None
    return t - (lo + int(hits[-1]))


def plain_forecast(history: np.ndarray, t: int, state: ForecasterState) -> np.ndarray:
    """AR forecast of periods ``t+1 .. t+horizon`` from prices up to and including ``t``."""
    p = state.order
    if t - p + 1 < 0:
        raise ConfigurationError(f"forecast at {t} needs {p} periods of history")
    thr = state.threshold
    prof = state.profile
    coeffs = [float(c) for c in state.coeffs]
    # most recent first
    lags = [min(float(history[t - i]), thr) - prof[(t - i) % PERIODS_PER_DAY] for i in range(p)]
    out = np.empty(state.horizon)
    for k in range(1, state.horizon + 1):
        nxt = 0.0
        for c, v in zip(coeffs, lags):
            nxt += c * v
        lags = [nxt] + lags[:-1]
        out[k - 1] = prof[(t + k) % PERIODS_PER_DAY] + nxt
    return out


def rolling_forecast(history: np.ndarray, t: int, state: ForecasterState) -> np.ndarray:
    """Elevated forecast: plain AR forecast times the post-spike elevation at issue time ``t``."""
    base = plain_forecast(history, t, state)
    e = state.elevation(spike_age(history, t, state))
    return base * e if e != 1.0 else base
