"""Price-responsive consumers making rolling horizon consumption plans.

``consumer_decide`` sees the current actual price followed by the forecasts for
the next ``horizon`` periods and returns a plan for all of them.  Only the first
entry is committed; ``advance`` carries the consumer state to the next period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from ..dataio import PERIODS_PER_DAY
from ..errors import ConfigurationError, InfeasibleError
from . import kernels

DT_HOURS = 0.25
Kind = Literal["linear", "thermal", "shiftable", "insensitive"]


@dataclass
class ThermalParams:
    """First-order building model with an HVAC cooling load.

    ``theta_{k+1} = a theta_k + (1 - a) (theta_out_k - r_th * cop * p_k)`` with
    ``a = exp(-dt / (r_th * c_th))``.  Discomfort is the squared softplus
    distance outside ``[band_lo, band_hi]``; ``effort`` adds ``q p^2 dt``.
    """

    r_th: float = 0.1
    c_th: float = 10.0
    cop: float = 3.0
    band_lo: float = 21.0
    band_hi: float = 24.0
    softness: float = 0.3
    weight: float = 20.0
    effort: float = 0.3
    hvac_max: float = 40.0
    theta0: float = 23.0
    tol: float = 1e-8
    max_sweeps: int = 500

    def __post_init__(self):
        for name in ("r_th", "c_th", "cop", "softness", "hvac_max"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"thermal {name} must be > 0")
        if self.band_lo > self.band_hi:
            raise ConfigurationError("band_lo must not exceed band_hi")
        if self.weight < 0 or self.effort < 0:
            raise ConfigurationError("weight and effort must be >= 0")

    @property
    def a(self) -> float:
        return math.exp(-DT_HOURS / (self.r_th * self.c_th))

    @property
    def g(self) -> float:
        return (1.0 - self.a) * self.r_th * self.cop


@dataclass
class JobSpec:
    """A daily deferrable job: ``energy_mwh`` to run within periods ``release..deadline`` (1-based)."""

    energy_mwh: float
    release: int
    deadline: int
    max_rate_mw: float

    def __post_init__(self):
        if self.deadline < self.release:
            raise InfeasibleError(f"job deadline {self.deadline} precedes release {self.release}")
        if not 1 <= self.release <= PERIODS_PER_DAY or not 1 <= self.deadline <= PERIODS_PER_DAY:
            raise ConfigurationError("job release and deadline must be within-day periods 1..96")
        if self.energy_mwh < 0 or not self.max_rate_mw > 0:
            raise ConfigurationError("job energy must be >= 0 and max rate > 0")
        capacity = self.max_rate_mw * DT_HOURS * (self.deadline - self.release + 1)
        if self.energy_mwh > capacity + 1e-12:
            raise InfeasibleError(f"job of {self.energy_mwh} MWh cannot fit {capacity} MWh of window capacity")


@dataclass
class ConsumerSpec:
    kind: Kind
    baseline: np.ndarray
    p_min: float = 0.0
    p_max: float = math.inf
    coeffs: np.ndarray | None = None
    thermal: ThermalParams | None = None
    jobs: list[JobSpec] = field(default_factory=list)
    horizon: int = 8

    def __post_init__(self):
        self.baseline = np.asarray(self.baseline, dtype=float)
        if self.baseline.shape != (PERIODS_PER_DAY,):
            raise ConfigurationError("baseline must be a 96-slot profile")
        if not np.all(self.baseline > 0):
            raise ConfigurationError("baseline load must be positive")
        if self.p_min > self.p_max:
            raise ConfigurationError("p_min must not exceed p_max")
        K = self.horizon + 1
        if self.kind == "linear":
            if self.coeffs is None:
                raise ConfigurationError("linear consumer needs price coefficients")
            self.coeffs = np.asarray(self.coeffs, dtype=float)
            if self.coeffs.shape != (K,):
                raise ConfigurationError(f"linear consumer needs {K} coefficients c_0..c_{K - 1}")
        elif self.kind == "thermal":
            if self.thermal is None:
                self.thermal = ThermalParams()
            top = self.baseline.max() + self.thermal.hvac_max
            if self.baseline.min() < self.p_min or top > self.p_max:
                raise ConfigurationError("baseline + HVAC range must lie within [p_min, p_max]")
        elif self.kind == "shiftable":
            if not self.jobs:
                raise ConfigurationError("shiftable consumer needs at least one job")
            top = self.baseline.max() + sum(j.max_rate_mw for j in self.jobs)
            if self.baseline.min() < self.p_min or top > self.p_max:
                raise ConfigurationError("baseline + job rates must lie within [p_min, p_max]")
        elif self.kind == "insensitive":
            if self.baseline.min() < self.p_min or self.baseline.max() > self.p_max:
                raise ConfigurationError("baseline must lie within [p_min, p_max]")
        else:
            raise ConfigurationError(f"unknown consumer kind {self.kind!r}")


@dataclass
class ConsumerState:
    """Everything a consumer carries between periods (snapshotted for re-simulation)."""

    theta: float = 0.0
    warm: np.ndarray | None = None
    remaining: tuple[float, ...] = ()

    def copy(self) -> "ConsumerState":
        return replace(self, warm=None if self.warm is None else self.warm.copy())


def initial_state(spec: ConsumerSpec) -> ConsumerState:
    if spec.kind == "thermal":
        return ConsumerState(theta=spec.thermal.theta0, warm=np.zeros(spec.horizon + 1))
    if spec.kind == "shiftable":
        return ConsumerState(remaining=tuple(0.0 for _ in spec.jobs))
    return ConsumerState()


@dataclass
class Decision:
    plan: np.ndarray  # total MW for periods t .. t + horizon
    flexible: np.ndarray  # price-dependent part (HVAC MW or job MW)
    job_first: tuple[float, ...] = ()  # MWh each job commits in the first period


def _slot(t: int) -> int:
    return t % PERIODS_PER_DAY


def place_job(remaining: float, prices: np.ndarray, slots: int, after: int, reservation: float, cap_mwh: float):
    """Greedy placement of ``remaining`` MWh into the cheapest slots.

    ``prices[:slots]`` are the horizon periods still inside the job window;
    ``after`` more periods lie beyond the horizon at the ``reservation`` price.
    Ties go to the earliest period.  Returns MWh per horizon slot.
    """
    placed = np.zeros(len(prices))
    if remaining <= 0.0:
        return placed
    # (price, time order, horizon slot or -1); beyond-horizon periods come after the horizon at equal price
    candidates = [(prices[k], k, k) for k in range(slots)] + [(reservation, slots + m, -1) for m in range(after)]
    candidates.sort(key=lambda c: (c[0], c[1]))
    left = remaining
    for _, _, k in candidates:
        amount = min(cap_mwh, left)
        if k >= 0:
            placed[k] += amount
        left -= amount
        if left <= 1e-12:
            break
    if left > 1e-9:
        raise InfeasibleError(f"{left:.6g} MWh of job energy cannot be placed before its deadline")
    return placed


def consumer_decide(
    spec: ConsumerSpec,
    forecast: np.ndarray,
    state: ConsumerState,
    t: int,
    temps: np.ndarray | None = None,
) -> Decision:
    """Plan periods ``t .. t + horizon`` given ``forecast`` = [actual price at t, forecasts...].

    ``temps`` are the outdoor temperatures over the same periods (thermal kind).
    """
    K = spec.horizon + 1
    forecast = np.asarray(forecast, dtype=float)
    if forecast.shape != (K,):
        raise ConfigurationError(f"forecast must have {K} entries, got {forecast.shape}")
    base = spec.baseline[[(t + k) % PERIODS_PER_DAY for k in range(K)]]
    if spec.kind == "insensitive":
        return Decision(base.copy(), np.zeros(K))
    if spec.kind == "linear":
        ext = np.concatenate([forecast, np.full(K - 1, forecast[-1])])
        flex = np.array([float(np.dot(spec.coeffs, ext[k : k + K])) for k in range(K)])
        plan = np.clip(base + flex, spec.p_min, spec.p_max)
        return Decision(plan, plan - base)
    if spec.kind == "thermal":
        th = spec.thermal
        if temps is None or len(temps) != K:
            raise ConfigurationError("thermal consumer needs the outdoor temperature over the horizon")
        warm = state.warm if state.warm is not None else np.zeros(K)
        start = np.concatenate([warm[1:], warm[-1:]])
        hvac, _ = kernels.solve_thermal(
            forecast, temps, state.theta, th.a, th.g, th.band_lo, th.band_hi, th.softness, th.weight,
            DT_HOURS, th.hvac_max, start, th.effort, th.tol, th.max_sweeps,
        )
        return Decision(base + hvac, hvac)
    # shiftable
    slot0 = _slot(t)
    reservation = float(np.mean(forecast))
    flex = np.zeros(K)
    first = []
    for job, rem in zip(spec.jobs, _active_remaining(spec, state, t)):
        if rem <= 0.0:
            first.append(0.0)
            continue
        last = job.deadline - 1  # 0-based slot
        slots = min(K, last - slot0 + 1)
        after = max(0, last - (slot0 + K - 1))
        placed = place_job(rem, forecast, slots, after, reservation, job.max_rate_mw * DT_HOURS)
        first.append(float(placed[0]))
        flex += placed / DT_HOURS
    return Decision(base + flex, flex, tuple(first))


def _active_remaining(spec: ConsumerSpec, state: ConsumerState, t: int) -> list[float]:
    """Remaining energy per job at period ``t``; a job's daily instance opens at its release period."""
    period = _slot(t) + 1
    out = []
    for k, job in enumerate(spec.jobs):
        if period < job.release or period > job.deadline:
            out.append(0.0)
        elif period == job.release:
            out.append(job.energy_mwh)
        else:
            out.append(state.remaining[k])
    return out


def advance(spec: ConsumerSpec, state: ConsumerState, decision: Decision, t: int, temp: float | None = None):
    """State after committing the first period of ``decision``."""
    if spec.kind == "thermal":
        th = spec.thermal
        hvac = float(decision.flexible[0])
        theta = th.a * state.theta + (1.0 - th.a) * temp - th.g * hvac
        return ConsumerState(theta=theta, warm=decision.flexible.copy())
    if spec.kind == "shiftable":
        rem = _active_remaining(spec, state, t)
        new = []
        for r, used in zip(rem, decision.job_first):
            r = r - used
            new.append(r if r > 1e-12 else 0.0)
        return ConsumerState(remaining=tuple(new))
    return state
