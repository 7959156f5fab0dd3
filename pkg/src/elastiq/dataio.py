"""Dataset parsing, calendar features, min-max scaling and windowed samples.

A dataset is a run of 15-minute periods.  Each period contributes nine model
features, in this order::

    price, load lagged by t_out, temp, rh, dewpoint, period (1..96), weekday (1..7), month (1..12), holiday

A sample anchored at global period ``T_c`` covers the ``t_in`` periods ending at
``T_c + t_out - 1``; its targets are the raw loads of ``T_c .. T_c + t_out - 1``.
Because the load column is lagged by ``t_out``, no feature in a window reads a
load at or after ``T_c``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError

log = logging.getLogger(__name__)

PERIODS_PER_DAY = 96
PERIOD = timedelta(minutes=15)
ANCHOR_FIRST = 24
ANCHOR_LAST = 80
CSV_HEADER = ("timestamp", "price_usd_mwh", "load_mw", "temp_c", "rh_pct", "dewpoint_c", "holiday")
FEATURES = ("price", "load_lag", "temp_c", "rh_pct", "dewpoint_c", "period", "weekday", "month", "holiday")
N_FEATURES = len(FEATURES)
PRICE_COL = 0
LOAD_COL = 1
# natural domains of the integer calendar columns
CALENDAR_RANGES = {5: (1.0, 96.0), 6: (1.0, 7.0), 7: (1.0, 12.0)}


@dataclass(frozen=True)
class PeriodRecord:
    timestamp: datetime
    price: float
    load: float
    temp_c: float
    rh_pct: float
    dewpoint_c: float
    holiday: int


@dataclass
class SeriesDataset:
    """Column-oriented dataset of consecutive 15-minute periods."""

    timestamps: np.ndarray  # datetime64[m]
    price: np.ndarray
    load: np.ndarray
    temp_c: np.ndarray
    rh_pct: np.ndarray
    dewpoint_c: np.ndarray
    holiday: np.ndarray

    periods_per_day = PERIODS_PER_DAY

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[m]")
        for name in ("price", "load", "temp_c", "rh_pct", "dewpoint_c"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.holiday = np.asarray(self.holiday, dtype=np.int64)
        n = len(self.timestamps)
        for name in CSV_HEADER[1:]:
            if len(self._column(name)) != n:
                raise ConfigurationError(f"column {name} has length {len(self._column(name))}, expected {n}")

    def _column(self, header_name: str) -> np.ndarray:
        return {
            "price_usd_mwh": self.price,
            "load_mw": self.load,
            "temp_c": self.temp_c,
            "rh_pct": self.rh_pct,
            "dewpoint_c": self.dewpoint_c,
            "holiday": self.holiday,
        }[header_name]

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def n_days(self) -> int:
        return len(self) // PERIODS_PER_DAY

    @property
    def period_index(self) -> np.ndarray:
        """Within-day period, 1..96."""
        minutes = (self.timestamps - self.timestamps.astype("datetime64[D]")).astype(np.int64)
        return minutes // 15 + 1

    @property
    def weekday(self) -> np.ndarray:
        """ISO weekday, Monday = 1 .. Sunday = 7."""
        days = self.timestamps.astype("datetime64[D]").astype(np.int64)
        return (days + 3) % 7 + 1

    @property
    def month(self) -> np.ndarray:
        months = self.timestamps.astype("datetime64[M]").astype(np.int64)
        return months % 12 + 1

    @property
    def records(self) -> list[PeriodRecord]:
        return [
            PeriodRecord(
                self.timestamps[k].astype(datetime),
                float(self.price[k]),
                float(self.load[k]),
                float(self.temp_c[k]),
                float(self.rh_pct[k]),
                float(self.dewpoint_c[k]),
                int(self.holiday[k]),
            )
            for k in range(len(self))
        ]

    def slice(self, start: int, stop: int) -> "SeriesDataset":
        sl = slice(start, stop)
        return SeriesDataset(
            self.timestamps[sl], self.price[sl], self.load[sl], self.temp_c[sl],
            self.rh_pct[sl], self.dewpoint_c[sl], self.holiday[sl],
        )

    def timestamp_str(self, k: int) -> str:
        return format_timestamp(self.timestamps[k])


def format_timestamp(ts: np.datetime64) -> str:
    return str(np.datetime64(ts, "s"))


# -- CSV -----------------------------------------------------------------------


def _parse_float(text: str, row: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}: {name} is not numeric ({text!r})", row=row, field=name) from None
    if not math.isfinite(value):
        raise DataError(f"row {row}: {name} is not finite ({text!r})", row=row, field=name)
    return value


def parse_dataset(path) -> SeriesDataset:
    """Read and validate a dataset CSV.

    Row numbers in error messages count the header as row 1.  A leading or
    trailing partial day is trimmed with a warning so the result always holds
    whole days.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty", row=1)
        header = [h.strip() for h in header]
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise DataError(f"missing column(s) {', '.join(missing)} in {path}", row=1, field=missing[0])
        col = {name: header.index(name) for name in CSV_HEADER}
        stamps: list[datetime] = []
        values: list[list[float]] = []
        for row, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) < len(header):
                raise DataError(f"row {row}: expected {len(header)} fields, got {len(fields)}", row=row)
            text = fields[col["timestamp"]].strip()
            try:
                ts = datetime.fromisoformat(text)
            except ValueError:
                raise DataError(f"row {row}: bad timestamp {text!r}", row=row, field="timestamp") from None
            if ts.tzinfo is not None:
                ts = ts.replace(tzinfo=None)
            if ts.minute % 15 or ts.second or ts.microsecond:
                raise DataError(f"row {row}: timestamp {text} is not 15-minute aligned", row=row, field="timestamp")
            if stamps and ts - stamps[-1] != PERIOD:
                what = "duplicated" if ts == stamps[-1] else "non-consecutive"
                raise DataError(f"row {row}: {what} timestamp {text}", row=row, field="timestamp")
            rec = [_parse_float(fields[col[c]], row, c) for c in CSV_HEADER[1:]]
            price, load, temp, rh, dew, hol = rec
            if load <= 0:
                raise DataError(
                    f"row {row}: load must be positive (elasticity denominator), got {load}", row=row, field="load_mw"
                )
            if not 0.0 <= rh <= 100.0:
                raise DataError(f"row {row}: rh_pct {rh} outside [0, 100]", row=row, field="rh_pct")
            if hol not in (0.0, 1.0):
                raise DataError(f"row {row}: holiday must be 0 or 1, got {hol}", row=row, field="holiday")
            stamps.append(ts)
            values.append(rec)
    if not stamps:
        raise DataError(f"{path} has no data rows", row=2)
    arr = np.array(values, dtype=float)
    ds = SeriesDataset(
        np.array(stamps, dtype="datetime64[m]"), arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4],
        arr[:, 5].astype(np.int64),
    )
    return trim_to_days(ds)


def trim_to_days(ds: SeriesDataset) -> SeriesDataset:
    """Drop a leading and trailing partial day."""
    if len(ds) == 0:
        return ds
    first = int(ds.period_index[0])
    start = 0 if first == 1 else PERIODS_PER_DAY - first + 1
    n_full = (len(ds) - start) // PERIODS_PER_DAY
    stop = start + n_full * PERIODS_PER_DAY
    if start or stop != len(ds):
        log.warning("trimming %d leading and %d trailing periods to whole days", start, len(ds) - stop)
    return ds.slice(start, stop)


def write_dataset(ds: SeriesDataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(len(ds)):
            w.writerow([
                ds.timestamp_str(k), repr(float(ds.price[k])), repr(float(ds.load[k])),
                repr(float(ds.temp_c[k])), repr(float(ds.rh_pct[k])), repr(float(ds.dewpoint_c[k])),
                int(ds.holiday[k]),
            ])


# -- features and scaling ------------------------------------------------------


def feature_matrix(ds: SeriesDataset, t_out: int) -> np.ndarray:
    """Raw ``(N, 9)`` features; the lagged-load column is NaN for the first ``t_out`` rows."""
    X = np.empty((len(ds), N_FEATURES))
    X[:, PRICE_COL] = ds.price
    X[:, LOAD_COL] = np.nan
    X[t_out:, LOAD_COL] = ds.load[: len(ds) - t_out]
    X[:, 2] = ds.temp_c
    X[:, 3] = ds.rh_pct
    X[:, 4] = ds.dewpoint_c
    X[:, 5] = ds.period_index
    X[:, 6] = ds.weekday
    X[:, 7] = ds.month
    X[:, 8] = ds.holiday
    return X


@dataclass
class Scaler:
    """Per-feature min-max scaling; a column with span below 1e-9 maps to 0.5."""

    mins: np.ndarray
    maxs: np.ndarray

    SPAN_EPS = 1e-9

    @classmethod
    def fit(cls, X: np.ndarray, fixed: dict[int, tuple[float, float]] | None = None) -> "Scaler":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ConfigurationError("scaler needs a non-empty 2-D training matrix")
        mins = np.nanmin(X, axis=0)
        maxs = np.nanmax(X, axis=0)
        for col, (lo, hi) in (fixed or {}).items():
            mins[col], maxs[col] = lo, hi
        return cls(mins, maxs)

    @property
    def span(self) -> np.ndarray:
        return self.maxs - self.mins

    def _degenerate(self) -> np.ndarray:
        return self.span < self.SPAN_EPS

    def scale(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        deg = self._degenerate()
        span = np.where(deg, 1.0, self.span)
        out = (X - self.mins) / span
        return np.where(deg, 0.5, out)

    def unscale(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        deg = self._degenerate()
        return np.where(deg, self.mins, Z * self.span + self.mins)

    def scale_column(self, values, col: int) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.span[col] < self.SPAN_EPS:
            return np.full_like(values, 0.5)
        return (values - self.mins[col]) / self.span[col]

    def unscale_column(self, values, col: int) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.span[col] < self.SPAN_EPS:
            return np.full_like(values, self.mins[col])
        return values * self.span[col] + self.mins[col]

    def to_dict(self) -> dict:
        return {"features": list(FEATURES), "min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Scaler":
        try:
            mins = np.array(doc["min"], dtype=float)
            maxs = np.array(doc["max"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed scaler: {exc}", field="min/max") from exc
        if mins.shape != (N_FEATURES,) or maxs.shape != (N_FEATURES,):
            raise DataError("scaler must hold 9 mins and 9 maxs", field="min/max")
        return cls(mins, maxs)


def fit_scaler(train: SeriesDataset, t_out: int = 9, calendar_domains: bool = True) -> Scaler:
    """Fit on the training split only.

    With ``calendar_domains`` the period, weekday and month columns use their
    natural ranges so months absent from a short training split still scale
    into [0, 1].
    """
    if len(train) <= t_out:
        raise ConfigurationError("training split too short to fit a scaler")
    X = feature_matrix(train, t_out)[t_out:]
    return Scaler.fit(X, CALENDAR_RANGES if calendar_domains else None)


# -- samples -------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    anchor: int
    window: np.ndarray
    target_loads: np.ndarray
    anchor_price: float


@dataclass
class SampleSet:
    """Stacked samples: ``windows (n, t_in, 9)`` scaled, ``targets (n, t_out)`` raw MW."""

    anchors: np.ndarray
    windows: np.ndarray
    targets: np.ndarray
    anchor_prices: np.ndarray
    timestamps: np.ndarray
    t_in: int
    t_out: int

    def __len__(self) -> int:
        return len(self.anchors)

    def __getitem__(self, k: int) -> Sample:
        return Sample(int(self.anchors[k]), self.windows[k], self.targets[k], float(self.anchor_prices[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def subset(self, mask_or_idx) -> "SampleSet":
        idx = np.asarray(mask_or_idx)
        return SampleSet(
            self.anchors[idx], self.windows[idx], self.targets[idx], self.anchor_prices[idx],
            self.timestamps[idx], self.t_in, self.t_out,
        )

    def timestamp_strs(self) -> list[str]:
        return [format_timestamp(t) for t in self.timestamps]


def admissible_anchors(ds: SeriesDataset, t_in: int, t_out: int) -> np.ndarray:
    """Global anchor indices with within-day period 24..80, full history and full future."""
    pidx = ds.period_index
    k = np.arange(len(ds))
    ok = (pidx >= ANCHOR_FIRST) & (pidx <= ANCHOR_LAST) & (k >= t_in) & (k + t_out - 1 <= len(ds) - 1)
    return k[ok]


def build_samples(
    ds: SeriesDataset, scaler: Scaler, t_in: int = 25, t_out: int = 9, anchors=None
) -> SampleSet:
    """One sample per admissible anchor (or per given anchor)."""
    if t_out > t_in:
        raise ConfigurationError(f"t_out={t_out} exceeds t_in={t_in}")
    valid = admissible_anchors(ds, t_in, t_out)
    if anchors is not None:
        anchors = np.asarray(anchors, dtype=np.int64)
        bad = np.setdiff1d(anchors, valid)
        if len(bad):
            raise ConfigurationError(f"anchor(s) {bad[:5].tolist()} not admissible")
    else:
        anchors = valid
    if len(anchors) == 0:
        log.warning("dataset of %d periods is too short for a %d-step window; no samples", len(ds), t_in)
        return SampleSet(
            np.zeros(0, np.int64), np.zeros((0, t_in, N_FEATURES)), np.zeros((0, t_out)), np.zeros(0),
            np.zeros(0, "datetime64[m]"), t_in, t_out,
        )
    Z = scaler.scale(feature_matrix(ds, t_out))
    offsets = np.arange(t_in) + (t_out - t_in)
    rows = anchors[:, None] + offsets[None, :]
    windows = Z[rows]
    targets = ds.load[anchors[:, None] + np.arange(t_out)[None, :]]
    return SampleSet(anchors, windows, targets, ds.price[anchors].copy(), ds.timestamps[anchors], t_in, t_out)


# -- splitting -----------------------------------------------------------------


@dataclass
class DatasetSplit:
    """Chronological split at a whole-day boundary (global period index)."""

    full: SeriesDataset
    boundary: int

    @property
    def train(self) -> SeriesDataset:
        return self.full.slice(0, self.boundary)

    @property
    def test(self) -> SeriesDataset:
        return self.full.slice(self.boundary, len(self.full))

    def __iter__(self):
        return iter((self.train, self.test))

    def partition(self, samples: SampleSet) -> tuple[SampleSet, SampleSet]:
        """Train gets anchors before the boundary; test the rest (its windows may read train history)."""
        is_test = samples.anchors >= self.boundary
        return samples.subset(~is_test), samples.subset(is_test)


def split_dataset(ds: SeriesDataset, test_fraction: float | None = None, boundary_day: int | None = None) -> DatasetSplit:
    """Split by ``boundary_day`` (days in train) or by ``test_fraction`` rounded to whole days."""
    n_days = ds.n_days
    if (test_fraction is None) == (boundary_day is None):
        raise ConfigurationError("give exactly one of test_fraction or boundary_day")
    if boundary_day is None:
        if not 0.0 < test_fraction < 1.0:
            raise ConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}")
        boundary_day = n_days - int(round(test_fraction * n_days))
    if not 0 < boundary_day < n_days:
        raise ConfigurationError(f"split boundary day {boundary_day} outside dataset of {n_days} days")
    return DatasetSplit(ds, boundary_day * PERIODS_PER_DAY)
