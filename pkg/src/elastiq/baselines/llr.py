"""Local linear regression: kernel-weighted ridge fits of future load on the anchor price."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..dataio import PERIODS_PER_DAY, SeriesDataset
from ..errors import ConfigurationError

log = logging.getLogger(__name__)

N_ELASTICITIES = 9


@dataclass
class LlrConfig:
    bandwidth: float = 12.0  # periods, within-day clock distance
    day_bandwidth: float = 7.0  # days
    ridge: float = 1e-6
    kernel: str = "gaussian"

    def __post_init__(self):
        if not self.bandwidth > 0 or not self.day_bandwidth > 0:
            raise ConfigurationError("LLR bandwidths must be > 0")
        if self.ridge < 0:
            raise ConfigurationError("LLR ridge must be >= 0")
        if self.kernel != "gaussian":
            raise ConfigurationError(f"unsupported LLR kernel {self.kernel!r}")


def local_linear_fit(x, Y, w, ridge: float = 0.0) -> np.ndarray | None:
    """Weighted ridge fit of each column of ``Y`` on ``[1, x]``; the intercept is not penalised.

    Returns ``(2, k)`` coefficients (intercept row, slope row), or None when
    the normal equations are singular.
    """
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(x), -1)
    w = np.asarray(w, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (w[:, None] * X)
    A[1, 1] += ridge
    rhs = X.T @ (w[:, None] * Y)
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e12:
        return None
    return np.linalg.solve(A, rhs)


def llr_estimate(ds: SeriesDataset, anchors, cfg: LlrConfig | None = None) -> np.ndarray:
    """Elasticity vectors ``(n, 9)``: ``e_tau = slope_tau * lam / p_{T_c+tau}``."""
    cfg = cfg or LlrConfig()
    anchors = np.asarray(anchors, dtype=np.int64)
    n = len(ds)
    t_all = np.arange(n - N_ELASTICITIES + 1)
    clock = t_all % PERIODS_PER_DAY
    day = t_all // PERIODS_PER_DAY
    lags = np.arange(N_ELASTICITIES)
    out = np.zeros((len(anchors), N_ELASTICITIES))
    reach = 3.0 * cfg.bandwidth
    day_reach = 3.0 * cfg.day_bandwidth
    for k, a in enumerate(anchors):
        if a + N_ELASTICITIES > n:
            raise ConfigurationError(f"anchor {a} lacks {N_ELASTICITIES} future periods")
        dc = clock - a % PERIODS_PER_DAY
        dd = day - a // PERIODS_PER_DAY
        m = (np.abs(dc) <= reach) & (np.abs(dd) <= day_reach)
        idx = t_all[m]
        w = np.exp(-0.5 * (dc[m] / cfg.bandwidth) ** 2 - 0.5 * (dd[m] / cfg.day_bandwidth) ** 2)
        coef = local_linear_fit(ds.price[idx], ds.load[idx[:, None] + lags], w, cfg.ridge)
        if coef is None:
            log.warning("singular local system at anchor %d; reporting zeros", a)
            continue
        out[k] = coef[1] * ds.price[a] / ds.load[a + lags]
    return out
