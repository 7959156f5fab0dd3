"""Run configuration and the simulate -> split -> train -> estimate -> evaluate pipeline."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import KfaConfig, LlrConfig, Snn2Config, kfa_estimate, llr_estimate, snn2_estimate
from .dataio import SampleSet, build_samples, fit_scaler, parse_dataset, split_dataset, write_dataset
from .errors import ConfigurationError, DataError, StageError
from .estimator import EstimatorConfig, SiameseBundle, estimate, fit_siamese, write_synthetic_csv
from .evaluate import MetricReport, breakdown, emit_report
from .market.scenario import Scenario, SimulationResult, builtin_scenario, load_scenario, read_oracle_csv, run_scenario, write_oracle_csv
from .nn import TrainConfig

log = logging.getLogger(__name__)

METHODS = ("smlstm", "2snn", "llr", "kfa")
ESTIMATES_HEADER = ("anchor_timestamp", "method") + tuple(f"e{k}" for k in range(9))
SPIKE_QUANTILE = 0.95
FAILED_MARKER = "FAILED"


@dataclass
class RunConfig:
    scenario: str | None = None
    dataset: str | None = None
    oracle: str | None = None
    methods: list = field(default_factory=lambda: list(METHODS))
    estimator: dict = field(default_factory=dict)
    llr: dict = field(default_factory=dict)
    kfa: dict = field(default_factory=dict)
    snn2: dict = field(default_factory=dict)
    test_fraction: float | None = 0.2
    boundary_day: int | None = None
    output_dir: str = "out"
    seed: int = 0
    base_dir: Path = field(default=Path("."), repr=False)

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigurationError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if self.scenario is None and self.dataset is None:
            raise ConfigurationError("run config needs a scenario or a dataset")

    def resolve(self, name: str | None) -> Path | None:
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out(self) -> Path:
        return self.resolve(self.output_dir)

    def load_scenario(self) -> Scenario:
        path = self.resolve(self.scenario)
        if path.suffix != ".json" and not path.exists():
            sc = builtin_scenario(self.scenario)
        elif not path.exists():
            raise ConfigurationError(f"scenario file not found: {path}")
        else:
            sc = load_scenario(path)
        return sc.with_seed(self.seed)

    def estimator_config(self) -> EstimatorConfig:
        doc = dict(self.estimator)
        s1 = {**doc.pop("stage1", {}), "seed": self.seed}
        s2 = {"loss": "weighted_mse", "trainable_scope": "head-only", **doc.pop("stage2", {}), "seed": self.seed + 1}
        return EstimatorConfig(**doc, seed=self.seed, stage1=TrainConfig(**s1), stage2=TrainConfig(**s2))

    def snn2_config(self) -> Snn2Config:
        doc = dict(self.snn2)
        s1 = {**doc.pop("stage1", {}), "seed": self.seed}
        s2 = {"loss": "weighted_mse", **doc.pop("stage2", {}), "seed": self.seed + 1}
        return Snn2Config(**doc, seed=self.seed, stage1=TrainConfig(**s1), stage2=TrainConfig(**s2))


def load_run_config(path, seed: int | None = None, output_dir: str | None = None) -> RunConfig:
    """Read a run config; ``--seed`` and ``ELASTIQ_OUT`` override the file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path} is not valid JSON: {exc}") from exc
    if "consumer" in doc:
        # a bare scenario file: run it with default settings
        doc = {"scenario": str(path.resolve())}
    known = set(RunConfig.__dataclass_fields__) - {"base_dir"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown run config field(s): {', '.join(sorted(unknown))}")
    cfg = RunConfig(**doc, base_dir=path.resolve().parent)
    if seed is not None:
        cfg.seed = int(seed)
    env = os.environ.get("ELASTIQ_OUT")
    if output_dir is not None:
        cfg.output_dir = str(Path(output_dir).resolve())
    elif env:
        cfg.output_dir = str(Path(env).resolve())
    return cfg


# -- stages ------------------------------------------------------------------


@dataclass
class Prepared:
    dataset: object
    split: object
    scaler: object
    train: SampleSet
    test: SampleSet
    simulation: SimulationResult | None


def stage_simulate(cfg: RunConfig) -> tuple[object, SimulationResult | None]:
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    if cfg.scenario is not None:
        result = run_scenario(cfg.load_scenario())
        write_dataset(result.dataset, out / "dataset.csv")
        return result.dataset, result
    path = cfg.resolve(cfg.dataset)
    if not path.exists():
        raise ConfigurationError(f"dataset file not found: {path}")
    return parse_dataset(path), None


def stage_split(cfg: RunConfig, ds, simulation=None) -> Prepared:
    est = cfg.estimator_config()
    split = split_dataset(ds, test_fraction=cfg.test_fraction if cfg.boundary_day is None else None, boundary_day=cfg.boundary_day)
    scaler = fit_scaler(split.train, t_out=est.t_out)
    train, test = split.partition(build_samples(ds, scaler, est.t_in, est.t_out))
    if len(train) == 0 or len(test) == 0:
        raise ConfigurationError("split leaves no training or no test anchors")
    return Prepared(ds, split, scaler, train, test, simulation)


def stage_train(cfg: RunConfig, prep: Prepared) -> SiameseBundle:
    bundle, synth, report = fit_siamese(prep.train, prep.scaler, cfg.estimator_config())
    bundle.save(cfg.out / "bundle")
    write_synthetic_csv(cfg.out / "synthetic.csv", prep.train, synth)
    log.info("stage 2 kept %d of %d synthetic samples", report.n_kept, report.n_samples)
    return bundle


def stage_estimate(cfg: RunConfig, prep: Prepared, bundle: SiameseBundle | None) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for method in cfg.methods:
        if method == "smlstm":
            if bundle is None:
                bundle = SiameseBundle.load(cfg.out / "bundle")
            out[method] = estimate(prep.test.windows, bundle)
        elif method == "2snn":
            out[method] = snn2_estimate(prep.train, prep.test, prep.scaler, cfg.snn2_config())[0]
        elif method == "llr":
            out[method] = llr_estimate(prep.dataset, prep.test.anchors, LlrConfig(**cfg.llr))
        elif method == "kfa":
            out[method] = kfa_estimate(prep.dataset, prep.test.anchors, KfaConfig(**cfg.kfa))
    write_estimates_csv(cfg.out / "estimates.csv", prep.test.timestamp_strs(), out)
    return out


def truth_for(cfg: RunConfig, prep: Prepared) -> np.ndarray:
    """Oracle vectors for the test anchors (simulated, or read from the oracle CSV)."""
    stamps = prep.test.timestamp_strs()
    if prep.simulation is not None:
        truth = prep.simulation.oracle_matrix(prep.test.anchors)
        write_oracle_csv(cfg.out / "oracle.csv", prep.dataset, prep.test.anchors, truth, prep.simulation.scenario.dlambda)
        return truth
    path = cfg.resolve(cfg.oracle) if cfg.oracle else cfg.out / "oracle.csv"
    if not path.exists():
        raise ConfigurationError(f"oracle file not found: {path}")
    o_stamps, values, _ = read_oracle_csv(path)
    index = {s: k for k, s in enumerate(o_stamps)}
    missing = [s for s in stamps if s not in index]
    if missing:
        raise DataError(f"oracle file {path} has no entry for anchor {missing[0]}")
    return values[[index[s] for s in stamps]]


def stage_evaluate(cfg: RunConfig, prep: Prepared, estimates: dict[str, np.ndarray], truth: np.ndarray) -> list[MetricReport]:
    threshold = float(np.quantile(prep.split.train.price, SPIKE_QUANTILE))
    echo = {
        "smlstm": cfg.estimator_config().to_dict(),
        "2snn": _plain(cfg.snn2_config()),
        "llr": _plain(LlrConfig(**cfg.llr)),
        "kfa": _plain(KfaConfig(**cfg.kfa)),
    }
    scenario = cfg.load_scenario().name if cfg.scenario is not None else None
    reports = []
    series = {}
    stamps = prep.test.timestamp_strs()
    for method, est in estimates.items():
        conf = {"method": echo[method], "scenario": scenario, "test_fraction": cfg.test_fraction, "boundary_day": cfg.boundary_day}
        reports.append(breakdown(est, truth, prep.test.anchor_prices, threshold, method, conf, cfg.seed))
        series[method] = (stamps, est, truth)
    emit_report(reports, cfg.out, series)
    return reports


def _plain(obj) -> dict:
    from dataclasses import asdict

    return asdict(obj)


def write_estimates_csv(path, stamps, estimates: dict[str, np.ndarray]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATES_HEADER)
        for method, est in estimates.items():
            for stamp, row in zip(stamps, est):
                w.writerow([stamp, method] + [repr(float(v)) for v in row])


def read_estimates_csv(path, stamps) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"estimates file not found: {path}")
    rows: dict[str, dict[str, list[float]]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != ESTIMATES_HEADER:
            raise DataError(f"{path}: header must be {','.join(ESTIMATES_HEADER)}", row=1)
        for line, rec in enumerate(reader, start=2):
            try:
                rows.setdefault(rec[1], {})[rec[0]] = [float(x) for x in rec[2:]]
            except (IndexError, ValueError):
                raise DataError(f"{path}: malformed row {line}", row=line) from None
    out = {}
    for method, by_stamp in rows.items():
        try:
            out[method] = np.array([by_stamp[s] for s in stamps])
        except KeyError as exc:
            raise DataError(f"{path}: method {method} lacks anchor {exc.args[0]}") from None
    return out


# -- orchestration -----------------------------------------------------------


@dataclass
class PipelineResult:
    reports: list[MetricReport]
    estimates: dict[str, np.ndarray]
    truth: np.ndarray
    prepared: Prepared
    bundle: SiameseBundle | None


def execute(cfg: RunConfig) -> PipelineResult:
    """Run every stage; a failure is re-raised as :class:`StageError` naming the stage."""
    stage = "simulate"
    try:
        ds, sim = stage_simulate(cfg)
        stage = "split"
        prep = stage_split(cfg, ds, sim)
        bundle = None
        if "smlstm" in cfg.methods:
            stage = "train"
            bundle = stage_train(cfg, prep)
        stage = "estimate"
        estimates = stage_estimate(cfg, prep, bundle)
        stage = "evaluate"
        truth = truth_for(cfg, prep)
        reports = stage_evaluate(cfg, prep, estimates, truth)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, str(exc)) from exc
    return PipelineResult(reports, estimates, truth, prep, bundle)


def mark_failed(out: Path, err: StageError) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / FAILED_MARKER).write_text(f"stage: {err.stage}\n{err}\n")


def run_pipeline(cfg: RunConfig) -> int:
    """Exit status 0 on success; on failure keep partial outputs and write a ``FAILED`` marker."""
    marker = cfg.out / FAILED_MARKER
    if marker.exists():
        marker.unlink()
    try:
        execute(cfg)
    except StageError as err:
        log.error("%s", err)
        mark_failed(cfg.out, err)
        return 1
    return 0

