"""Scenario files: JSON description -> simulated dataset plus ground-truth elasticities.

A scenario simulates ``warmup_days`` (used to fit the forecaster, not emitted),
then ``days`` emitted days, then one padding day so the last plans see a full
horizon.  Seeds for the price and weather processes derive from ``seed``.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path

import numpy as np

from ..dataio import ANCHOR_FIRST, ANCHOR_LAST, PERIODS_PER_DAY, SeriesDataset, format_timestamp
from ..errors import ConfigurationError, DataError
from .consumers import ConsumerSpec, JobSpec, ThermalParams
from .forecaster import ForecasterSpec, ForecasterState, fit_forecaster
from .prices import PriceProcessSpec, synth_prices
from .simulate import N_ELASTICITIES, SimulationTrace, oracle_at, simulate
from .weather import WeatherSpec, synth_weather

log = logging.getLogger(__name__)

ORACLE_HEADER = ("anchor_timestamp",) + tuple(f"e{k}" for k in range(N_ELASTICITIES)) + ("dlambda",)


@dataclass
class Scenario:
    name: str
    consumer: dict
    start: str = "2023-05-01"
    days: int = 60
    warmup_days: int = 14
    seed: int = 0
    price: dict = field(default_factory=dict)
    weather: dict = field(default_factory=dict)
    forecaster: dict = field(default_factory=dict)
    holidays: list = field(default_factory=list)
    dlambda: float = 3.0

    def __post_init__(self):
        if self.days < 1 or self.warmup_days < 1:
            raise ConfigurationError("days and warmup_days must be >= 1")
        if not self.dlambda > 0:
            raise ConfigurationError("dlambda must be > 0")

    def with_seed(self, seed: int) -> "Scenario":
        out = copy.deepcopy(self)
        out.seed = int(seed)
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    # -- builders --------------------------------------------------------------

    def price_spec(self) -> PriceProcessSpec:
        return PriceProcessSpec(**{**self.price, "seed": self.seed * 2 + 11})

    def weather_spec(self) -> WeatherSpec:
        return WeatherSpec(**{**self.weather, "seed": self.seed * 2 + 12})

    def forecaster_spec(self) -> ForecasterSpec:
        return ForecasterSpec(**self.forecaster)

    def consumer_spec(self) -> ConsumerSpec:
        return consumer_from_dict(self.consumer)


def _baseline(spec) -> np.ndarray:
    if isinstance(spec, (int, float)):
        return np.full(PERIODS_PER_DAY, float(spec))
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if isinstance(spec, dict):
        s = np.arange(PERIODS_PER_DAY)
        level = float(spec.get("level", 100.0))
        amp = float(spec.get("amplitude", 0.0))
        peak = float(spec.get("peak_period", 60))
        return level * (1.0 + amp * np.cos(2 * np.pi * (s - peak) / PERIODS_PER_DAY))
    raise ConfigurationError(f"unsupported baseline specification {spec!r}")


def consumer_from_dict(doc: dict) -> ConsumerSpec:
    doc = dict(doc)
    try:
        kind = doc.pop("kind")
    except KeyError:
        raise ConfigurationError("consumer needs a 'kind'") from None
    baseline = _baseline(doc.pop("baseline", 100.0))
    thermal = doc.pop("thermal", None)
    jobs = doc.pop("jobs", [])
    return ConsumerSpec(
        kind=kind,
        baseline=baseline,
        thermal=ThermalParams(**thermal) if thermal is not None else None,
        jobs=[JobSpec(**j) for j in jobs],
        **doc,
    )


def load_scenario(source) -> Scenario:
    """Read a scenario from a JSON path or a dict."""
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigurationError(f"scenario file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"scenario file {path} is not valid JSON: {exc}") from exc
    known = {f.name for f in fields(Scenario)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
    try:
        return Scenario(**doc)
    except TypeError as exc:
        raise ConfigurationError(f"malformed scenario: {exc}") from exc


def builtin_scenario(name: str) -> Scenario:
    path = Path(__file__).resolve().parent.parent / "data" / f"{name}.json"
    if not path.exists():
        raise ConfigurationError(f"no built-in scenario named {name!r}")
    return load_scenario(path)


@dataclass
class SimulationResult:
    """Emitted dataset plus everything needed to compute oracle elasticities."""

    scenario: Scenario
    dataset: SeriesDataset
    trace: SimulationTrace
    offset: int  # trace index of the first emitted period
    injected_spikes: np.ndarray  # over the emitted periods

    @property
    def forecaster(self) -> ForecasterState:
        return self.trace.forecaster

    def oracle(self, anchor: int, dlambda: float | None = None):
        """Ground-truth elasticity vector at an emitted-dataset anchor index."""
        from .simulate import OracleResult

        d = self.scenario.dlambda if dlambda is None else dlambda
        return OracleResult(int(anchor), oracle_at(self.trace, int(anchor) + self.offset, d), d)

    def oracle_matrix(self, anchors, dlambda: float | None = None) -> np.ndarray:
        d = self.scenario.dlambda if dlambda is None else dlambda
        anchors = np.asarray(anchors, dtype=np.int64)
        out = np.empty((len(anchors), N_ELASTICITIES))
        for k, a in enumerate(anchors):
            out[k] = oracle_at(self.trace, int(a) + self.offset, d)
        return out

    def anchors(self) -> np.ndarray:
        """Every emitted period with within-day index 24..80 (the oracle needs no history window)."""
        pidx = self.dataset.period_index
        return np.flatnonzero((pidx >= ANCHOR_FIRST) & (pidx <= ANCHOR_LAST))


def run_scenario(scenario: Scenario) -> SimulationResult:
    total_days = scenario.warmup_days + scenario.days + 1
    price = synth_prices(scenario.price_spec(), total_days)
    start = date.fromisoformat(scenario.start)
    first_day = np.datetime64(start, "D") - np.timedelta64(scenario.warmup_days, "D")
    doy = int((first_day - first_day.astype("datetime64[Y]")).astype(int))
    weather = synth_weather(scenario.weather_spec(), total_days, start_day_of_year=doy)
    warm = scenario.warmup_days * PERIODS_PER_DAY
    fstate = fit_forecaster(price.prices[:warm], scenario.forecaster_spec())
    consumer = scenario.consumer_spec()
    end = warm + scenario.days * PERIODS_PER_DAY
    trace = simulate(price.prices, weather.temp_c, consumer, fstate, t_first=fstate.order, t_last=end)
    sl = slice(warm, end)
    n = end - warm
    stamps = np.datetime64(start, "m") + np.arange(n) * np.timedelta64(15, "m")
    holidays = {np.datetime64(h, "D") for h in scenario.holidays}
    hol = np.array([d in holidays for d in stamps.astype("datetime64[D]")], dtype=np.int64)
    ds = SeriesDataset(
        stamps, price.prices[sl].copy(), trace.loads[sl].copy(), weather.temp_c[sl].copy(),
        weather.rh_pct[sl].copy(), weather.dewpoint_c[sl].copy(), hol,
    )
    return SimulationResult(scenario, ds, trace, warm, price.spikes[sl].copy())


def write_oracle_csv(path, dataset: SeriesDataset, anchors, values: np.ndarray, dlambda: float) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORACLE_HEADER)
        for a, row in zip(anchors, values):
            w.writerow([format_timestamp(dataset.timestamps[a])] + [repr(float(v)) for v in row] + [repr(float(dlambda))])


def read_oracle_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Return ``(anchor_timestamps, values (n, 9), dlambda (n,))``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ORACLE_HEADER:
            raise DataError(f"{path}: oracle header must be {','.join(ORACLE_HEADER)}", row=1)
        stamps, vals, dl = [], [], []
        for row, fields_ in enumerate(reader, start=2):
            try:
                nums = [float(x) for x in fields_[1:]]
            except ValueError:
                raise DataError(f"{path}: row {row} has a non-numeric value", row=row) from None
            if len(nums) != N_ELASTICITIES + 1:
                raise DataError(f"{path}: row {row} has {len(fields_)} fields", row=row)
            stamps.append(fields_[0])
            vals.append(nums[:-1])
            dl.append(nums[-1])
    return stamps, np.array(vals).reshape(-1, N_ELASTICITIES), np.array(dl)
