"""Rolling decision simulation and the finite-difference elasticity oracle.

At every period the forecaster re-forecasts from the realised price history,
the consumer re-plans the horizon, and only the first planned period becomes
realised load.  The consumer state before each decision is stored so any
anchor can be re-simulated with a perturbed current price.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import PERIODS_PER_DAY
from ..errors import ConfigurationError
from .consumers import ConsumerSpec, ConsumerState, advance, consumer_decide, initial_state
from .forecaster import ForecasterState, rolling_forecast

N_ELASTICITIES = 9


@dataclass
class SimulationTrace:
    prices: np.ndarray
    temps: np.ndarray
    loads: np.ndarray  # realised MW; baseline outside the simulated range
    forecasts: np.ndarray  # (n, horizon) forecasts issued at each period
    states: list  # ConsumerState before the decision at t, or None outside the range
    t_first: int
    t_last: int
    consumer: ConsumerSpec
    forecaster: ForecasterState


@dataclass
class OracleResult:
    anchor: int
    values: np.ndarray
    dlambda: float


def _step(prices, temps, consumer: ConsumerSpec, fstate: ForecasterState, state: ConsumerState, t: int):
    K = consumer.horizon + 1
    fc = rolling_forecast(prices, t, fstate)
    forecast = np.empty(K)
    forecast[0] = prices[t]
    forecast[1:] = fc
    horizon_temps = temps[t : t + K] if consumer.kind == "thermal" else None
    dec = consumer_decide(consumer, forecast, state, t, horizon_temps)
    new = advance(consumer, state, dec, t, float(temps[t]))
    return float(dec.plan[0]), fc, new


def simulate(
    prices: np.ndarray,
    temps: np.ndarray,
    consumer: ConsumerSpec,
    forecaster: ForecasterState,
    t_first: int | None = None,
    t_last: int | None = None,
    state: ConsumerState | None = None,
) -> SimulationTrace:
    """Run the rolling process over periods ``t_first .. t_last - 1``.

    The price and temperature arrays must extend ``horizon`` periods past
    ``t_last`` so every plan sees a full horizon.
    """
    prices = np.asarray(prices, dtype=float)
    temps = np.asarray(temps, dtype=float)
    if forecaster.horizon != consumer.horizon:
        raise ConfigurationError("forecaster and consumer horizons differ")
    n = len(prices)
    if len(temps) != n:
        raise ConfigurationError("price and temperature series must be aligned")
    K = consumer.horizon + 1
    t_first = forecaster.order if t_first is None else t_first
    t_last = n - K + 1 if t_last is None else t_last
    if t_first < forecaster.order - 1 or t_last + K - 1 > n or t_first >= t_last:
        raise ConfigurationError(f"simulation range [{t_first}, {t_last}) does not fit {n} periods")
    loads = consumer.baseline[np.arange(n) % PERIODS_PER_DAY].copy()
    forecasts = np.full((n, consumer.horizon), np.nan)
    states: list = [None] * n
    state = initial_state(consumer) if state is None else state
    for t in range(t_first, t_last):
        states[t] = state.copy()
        loads[t], forecasts[t], state = _step(prices, temps, consumer, forecaster, state, t)
    return SimulationTrace(prices, temps, loads, forecasts, states, t_first, t_last, consumer, forecaster)


def rollout(trace: SimulationTrace, t0: int, prices: np.ndarray, steps: int) -> np.ndarray:
    """Re-simulate ``steps`` periods from the snapshot at ``t0`` under a modified price series."""
    if trace.states[t0] is None or t0 + steps > trace.t_last:
        raise ConfigurationError(f"no snapshot to re-simulate {steps} periods from {t0}")
    state = trace.states[t0].copy()
    out = np.empty(steps)
    for k in range(steps):
        out[k], _, state = _step(prices, trace.temps, trace.consumer, trace.forecaster, state, t0 + k)
    return out


def oracle_at(trace: SimulationTrace, t0: int, dlambda: float = 3.0) -> np.ndarray:
    """Central-difference elasticities ``e_0..e_8`` of realised load w.r.t. the price at ``t0``."""
    if not dlambda > 0:
        raise ConfigurationError("dlambda must be > 0")
    lam = trace.prices[t0]
    up = trace.prices.copy()
    up[t0] = lam + dlambda
    down = trace.prices.copy()
    down[t0] = lam - dlambda
    p_up = rollout(trace, t0, up, N_ELASTICITIES)
    p_down = rollout(trace, t0, down, N_ELASTICITIES)
    base = trace.loads[t0 : t0 + N_ELASTICITIES]
    return (p_up - p_down) / (2.0 * dlambda) * lam / base
