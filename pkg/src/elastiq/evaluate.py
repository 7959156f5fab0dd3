"""Error metrics, own/cross and spike/normal breakdowns, and report files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

N_ELASTICITIES = 9
METRICS_HEADER = ("method", "rmse", "mae", "own_rmse", "cross_rmse", "spike_rmse", "normal_rmse")
SERIES_HEADER = ("anchor_timestamp", "method", "tau", "estimate", "truth")


def _aligned(estimates, truth) -> tuple[np.ndarray, np.ndarray]:
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ConfigurationError(f"estimates {est.shape} and truth {tru.shape} are not aligned")
    if est.size == 0:
        raise ConfigurationError("no anchors to evaluate")
    return est, tru


def compute_metrics(estimates, truth) -> tuple[float, float]:
    """``(rmse, mae)`` over every entry of every anchor."""
    est, tru = _aligned(estimates, truth)
    err = (est - tru).ravel()
    return math.sqrt(float(np.mean(err * err))), float(np.mean(np.abs(err)))


def _bucket(err: np.ndarray) -> tuple[float | None, int]:
    if err.size == 0:
        return None, 0
    return math.sqrt(float(np.mean(err * err))), int(err.size)


@dataclass
class MetricReport:
    method: str
    rmse: float
    mae: float
    own_rmse: float | None
    cross_rmse: float | None
    spike_rmse: float | None
    normal_rmse: float | None
    counts: dict = field(default_factory=dict)  # entries per bucket, plus "total" and "anchors"
    spike_threshold: float = math.nan
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricReport":
        return cls(**doc)

    def partition_residual(self, buckets: tuple[str, str]) -> float:
        """``|rmse^2 N - sum_b rmse_b^2 N_b|`` for a two-bucket partition."""
        total = self.rmse**2 * self.counts["total"]
        parts = 0.0
        for b in buckets:
            value = getattr(self, f"{b}_rmse")
            if value is not None:
                parts += value**2 * self.counts[b]
        return abs(total - parts)


def breakdown(
    estimates,
    truth,
    prices,
    spike_threshold: float,
    method: str = "",
    config: dict | None = None,
    seed: int | None = None,
) -> MetricReport:
    """Overall and bucketed errors; spike anchors have ``price >= spike_threshold``."""
    est, tru = _aligned(estimates, truth)
    if est.ndim != 2 or est.shape[1] != N_ELASTICITIES:
        raise ConfigurationError(f"elasticity arrays must be (n, {N_ELASTICITIES})")
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (len(est),):
        raise ConfigurationError("one anchor price per elasticity vector is required")
    err = est - tru
    rmse, mae = compute_metrics(est, tru)
    spike = prices >= spike_threshold
    own, n_own = _bucket(err[:, 0])
    cross, n_cross = _bucket(err[:, 1:])
    spk, n_spk = _bucket(err[spike])
    nrm, n_nrm = _bucket(err[~spike])
    counts = {"total": int(err.size), "anchors": len(est), "own": n_own, "cross": n_cross, "spike": n_spk, "normal": n_nrm}
    return MetricReport(method, rmse, mae, own, cross, spk, nrm, counts, float(spike_threshold), dict(config or {}), seed)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def emit_report(reports: list[MetricReport], directory, series: dict | None = None) -> dict[str, Path]:
    """Write ``metrics.json``, ``metrics.csv`` and ``elasticity_series.csv``.

    ``series`` maps a method name to ``(anchor_timestamps, estimates, truth)``.
    """
    if not reports:
        raise ConfigurationError("no methods evaluated")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"json": d / "metrics.json", "csv": d / "metrics.csv", "series": d / "elasticity_series.csv"}
    doc = {"reports": [r.to_dict() for r in reports]}
    paths["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with paths["csv"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in reports:
            w.writerow([r.method, _fmt(r.rmse), _fmt(r.mae), _fmt(r.own_rmse), _fmt(r.cross_rmse), _fmt(r.spike_rmse), _fmt(r.normal_rmse)])
    with paths["series"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for method, (stamps, est, tru) in (series or {}).items():
            est = np.asarray(est, dtype=float)
            tru = np.asarray(tru, dtype=float)
            for k, stamp in enumerate(stamps):
                for tau in range(N_ELASTICITIES):
                    w.writerow([stamp, method, tau, repr(float(est[k, tau])), repr(float(tru[k, tau]))])
    return paths


def read_reports(path) -> list[MetricReport]:
    doc = json.loads(Path(path).read_text())
    return [MetricReport.from_dict(r) for r in doc["reports"]]
