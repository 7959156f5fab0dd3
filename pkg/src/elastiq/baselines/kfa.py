"""Kalman-filter estimates of time-varying price sensitivities.

The state holds one sensitivity per look-ahead step and follows a random walk.
Each admissible anchor, in time order, contributes one observation per step:
the load deviation from its clock-slot mean regressed on the anchor price's
deviation from its clock-slot mean.  Both sides are standardised so the noise
variances are unit-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import ANCHOR_FIRST, ANCHOR_LAST, PERIODS_PER_DAY, SeriesDataset
from ..errors import ConfigurationError, NumericError

N_ELASTICITIES = 9


@dataclass
class KfaConfig:
    q: float = 1e-4  # state-noise variance per update
    r: float = 1e-2  # observation-noise variance
    p0: float = 1.0  # initial state variance

    def __post_init__(self):
        if not self.q > 0 or not self.r > 0 or not self.p0 > 0:
            raise ConfigurationError("KFA q, r and p0 must be > 0")


def kalman_filter(h, y, q: float, r: float, p0: float, x0=None) -> tuple[np.ndarray, np.ndarray]:
    """Independent scalar random-walk filters, one per column.

    ``h`` and ``y`` are ``(T, k)`` regressors and observations.  Returns the
    filtered states and variances after each update, both ``(T, k)``.
    """
    h = np.atleast_2d(np.asarray(h, dtype=float).T).T
    y = np.atleast_2d(np.asarray(y, dtype=float).T).T
    T, k = y.shape
    x = np.zeros(k) if x0 is None else np.asarray(x0, dtype=float).copy()
    P = np.full(k, float(p0))
    xs = np.empty((T, k))
    Ps = np.empty((T, k))
    for t in range(T):
        P = P + q
        S = h[t] * h[t] * P + r
        if np.any(~(P > 0)) or np.any(~(S > 0)):
            raise NumericError(f"covariance lost positive definiteness at step {t} (q={q}, r={r})", index=t)
        K = P * h[t] / S
        x = x + K * (y[t] - h[t] * x)
        P = (1.0 - K * h[t]) * P
        xs[t] = x
        Ps[t] = P
    return xs, Ps


def _slot_means(values: np.ndarray, slots: np.ndarray) -> np.ndarray:
    return np.bincount(slots, weights=values, minlength=PERIODS_PER_DAY) / np.maximum(
        np.bincount(slots, minlength=PERIODS_PER_DAY), 1
    )


def kfa_estimate(ds: SeriesDataset, anchors, cfg: KfaConfig | None = None) -> np.ndarray:
    """Filter over every admissible anchor in time order; report the requested ones ``(n, 9)``."""
    cfg = cfg or KfaConfig()
    anchors = np.asarray(anchors, dtype=np.int64)
    n = len(ds)
    slots = np.arange(n) % PERIODS_PER_DAY
    lags = np.arange(N_ELASTICITIES)
    run = np.flatnonzero(
        (slots + 1 >= ANCHOR_FIRST) & (slots + 1 <= ANCHOR_LAST) & (np.arange(n) + N_ELASTICITIES <= n)
    )
    pos = np.searchsorted(run, anchors)
    if np.any(pos >= len(run)) or np.any(run[np.minimum(pos, len(run) - 1)] != anchors):
        raise ConfigurationError("KFA anchors must be admissible anchor periods")
    lam_dev = ds.price - _slot_means(ds.price, slots)[slots]
    load_dev = ds.load - _slot_means(ds.load, slots)[slots]
    s_lam = float(np.std(lam_dev)) or 1.0
    s_load = float(np.std(load_dev)) or 1.0
    h = np.repeat((lam_dev[run] / s_lam)[:, None], N_ELASTICITIES, axis=1)
    y = load_dev[run[:, None] + lags] / s_load
    xs, _ = kalman_filter(h, y, cfg.q, cfg.r, cfg.p0)
    slope = xs[pos] * s_load / s_lam  # MW per USD/MWh
    return slope * ds.price[anchors][:, None] / ds.load[anchors[:, None] + lags]
