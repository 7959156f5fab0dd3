"""Two-stage elasticity estimation with a shared (frozen) LSTM cell.

Stage 1 fits a load-response network on windows of features.  Its price
sensitivity is read off by central differences on the anchor-step price,
giving synthetic elasticity targets that are filtered and weighted by how
well stage 1 predicted the sample.  Stage 2 reuses the stage-1 cell unchanged
and trains a fresh dense head to emit the elasticities directly.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataio import LOAD_COL, PRICE_COL, SampleSet, Scaler, format_timestamp
from .errors import ConfigurationError, DataError, EmptyLossError
from .nn import Batch, NetworkMeta, NetworkParams, TrainConfig, forward_sequence, init_params, load_params, predict, save_params, train
from .nn.lstm import batch_encodings
from .nn.params import with_new_head
from .nn.train import TrainHistory

log = logging.getLogger(__name__)

N_ELASTICITIES = 9
NO_RELIABLE_DATA = "no reliable synthetic data; lower η_th or improve stage 1"
SYNTHETIC_HEADER = ("anchor_timestamp",) + tuple(f"e{k}" for k in range(N_ELASTICITIES)) + ("eta", "wf")


def _train_config(doc) -> TrainConfig:
    return doc if isinstance(doc, TrainConfig) else TrainConfig(**(doc or {}))


@dataclass
class EstimatorConfig:
    dlambda: float = 3.0
    eta_th: float = 0.8
    alpha: float = 0.5
    t_in: int = 25
    t_out: int = 9
    n_cell: int = 32
    n_den_p: int = 32
    n_den_e: int = 48
    # one-hot tail step appended to the stage-2 head input
    tail_position: bool = True
    seed: int = 0
    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: TrainConfig = field(default_factory=lambda: TrainConfig(loss="weighted_mse", trainable_scope="head-only"))

    def __post_init__(self):
        self.stage1 = _train_config(self.stage1)
        self.stage2 = _train_config(self.stage2)
        if not self.dlambda > 0:
            raise ConfigurationError("dlambda must be > 0")
        if not 0 < self.eta_th <= 1:
            raise ConfigurationError("eta_th must be in (0, 1]")
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be > 0")
        if self.t_out != N_ELASTICITIES:
            raise ConfigurationError(f"t_out must be {N_ELASTICITIES} (current period plus 8 ahead)")
        if self.stage2.trainable_scope != "head-only":
            raise ConfigurationError("stage 2 trains the dense head only")

    @property
    def meta_p(self) -> NetworkMeta:
        return NetworkMeta(self.n_cell, self.n_den_p, 9, self.t_in, self.t_out)

    @property
    def meta_e(self) -> NetworkMeta:
        return NetworkMeta(self.n_cell, self.n_den_e, 9, self.t_in, self.t_out, tail_position=self.tail_position)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EstimatorConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown estimator field(s): {', '.join(sorted(unknown))}")
        return cls(**doc)


# -- stage 1 -----------------------------------------------------------------


def load_batch(samples: SampleSet, scaler: Scaler) -> Batch:
    """Windows with loads scaled like the lagged-load feature column."""
    return Batch(samples.windows, scaler.scale_column(samples.targets, LOAD_COL))


def predict_loads(params_p: NetworkParams, windows: np.ndarray, scaler: Scaler) -> np.ndarray:
    """Stage-1 predictions in MW, shape ``(n, t_out)``."""
    return scaler.unscale_column(predict(params_p, windows), LOAD_COL)


def train_stage1(
    samples: SampleSet, scaler: Scaler, cfg: EstimatorConfig, val: SampleSet | None = None
) -> tuple[NetworkParams, TrainHistory]:
    if len(samples) == 0:
        raise ConfigurationError("stage 1 needs at least one sample")
    params = init_params(cfg.meta_p, seed=cfg.seed)
    vb = load_batch(val, scaler) if val is not None and len(val) else None
    return train(params, load_batch(samples, scaler), cfg.stage1, val=vb)


def encode(window: np.ndarray, params_p: NetworkParams) -> np.ndarray:
    """Encoding vectors ``(t_out, n_cell)`` recorded at the tail steps."""
    return forward_sequence(window, params_p)[1]


# -- synthetic elasticities --------------------------------------------------


def secant_elasticities(p_plus, p_minus, anchor_prices, loads, dlambda: float) -> np.ndarray:
    """``lam / dlam * (p_plus - p_minus) / (2 p)`` per tail step."""
    p_plus = np.asarray(p_plus, dtype=float)
    p_minus = np.asarray(p_minus, dtype=float)
    loads = np.asarray(loads, dtype=float)
    if np.any(loads <= 0):
        raise DataError("recorded load must be positive to form an elasticity")
    lam = np.asarray(anchor_prices, dtype=float)[..., None]
    return lam / dlambda * (p_plus - p_minus) / (2.0 * loads)


def perturb_price(values: np.ndarray, scaler: Scaler, delta: float) -> np.ndarray:
    """Shift scaled prices by ``delta`` USD/MWh, re-scaled without clipping."""
    return scaler.scale_column(scaler.unscale_column(values, PRICE_COL) + delta, PRICE_COL)


def perturbed_windows(windows: np.ndarray, scaler: Scaler, dlambda: float) -> tuple[np.ndarray, np.ndarray]:
    """Copies of ``windows`` with the anchor-step price moved by +dlambda and -dlambda."""
    windows = np.asarray(windows, dtype=float)
    t_in = windows.shape[-2]
    step = t_in - N_ELASTICITIES
    up = windows.copy()
    down = windows.copy()
    up[..., step, PRICE_COL] = perturb_price(windows[..., step, PRICE_COL], scaler, dlambda)
    down[..., step, PRICE_COL] = perturb_price(windows[..., step, PRICE_COL], scaler, -dlambda)
    return up, down


def generate_synthetic(
    samples: SampleSet,
    params_p: NetworkParams,
    dlambda: float,
    scaler: Scaler,
    predictor: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Synthetic elasticities ``(n, 9)`` from two perturbed stage-1 passes.

    ``predictor`` maps windows to MW predictions and defaults to the stage-1
    network; a stub can be supplied to test the secant arithmetic alone.
    """
    if not dlambda > 0:
        raise ConfigurationError("dlambda must be > 0")
    if np.any(samples.anchor_prices <= 0):
        raise DataError("anchor price must be positive for the secant elasticity")
    fn = predictor or (lambda w: predict_loads(params_p, w, scaler))
    up, down = perturbed_windows(samples.windows, scaler, dlambda)
    return secant_elasticities(fn(up), fn(down), samples.anchor_prices, samples.targets, dlambda)


def prediction_accuracy(pred, loads) -> np.ndarray:
    """``1 - mean(((pred - p) / p)^2)`` over the last axis."""
    pred = np.asarray(pred, dtype=float)
    loads = np.asarray(loads, dtype=float)
    return 1.0 - np.mean(((pred - loads) / loads) ** 2, axis=-1)


def wf_from_eta(eta, eta_th: float, alpha: float) -> np.ndarray:
    """``I(eta >= eta_th) / (eta + alpha)``; the boundary is kept."""
    eta = np.asarray(eta, dtype=float)
    keep = eta >= eta_th
    return np.where(keep, 1.0 / np.where(keep, eta + alpha, 1.0), 0.0)


def weighting_factor(
    samples: SampleSet, params_p: NetworkParams, scaler: Scaler, eta_th: float, alpha: float
) -> tuple[np.ndarray, np.ndarray]:
    """``(wf, eta)`` per sample from the unperturbed stage-1 prediction."""
    eta = prediction_accuracy(predict_loads(params_p, samples.windows, scaler), samples.targets)
    return wf_from_eta(eta, eta_th, alpha), eta


@dataclass
class SyntheticSet:
    targets: np.ndarray  # (n, 9)
    eta: np.ndarray
    wf: np.ndarray

    @property
    def n_kept(self) -> int:
        return int(np.count_nonzero(self.wf))


def build_synthetic(samples: SampleSet, params_p: NetworkParams, scaler: Scaler, cfg: EstimatorConfig) -> SyntheticSet:
    targets = generate_synthetic(samples, params_p, cfg.dlambda, scaler)
    wf, eta = weighting_factor(samples, params_p, scaler, cfg.eta_th, cfg.alpha)
    return SyntheticSet(targets, eta, wf)


def write_synthetic_csv(path, samples: SampleSet, synth: SyntheticSet) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SYNTHETIC_HEADER)
        for k in range(len(samples)):
            row = [format_timestamp(samples.timestamps[k])]
            row += [repr(float(v)) for v in synth.targets[k]]
            row += [repr(float(synth.eta[k])), repr(float(synth.wf[k]))]
            w.writerow(row)


# -- stage 2 -----------------------------------------------------------------


def train_stage2(
    windows: np.ndarray, synth: SyntheticSet, params_p: NetworkParams, cfg: EstimatorConfig
) -> tuple[NetworkParams, TrainHistory]:
    """Fresh head on the frozen stage-1 cell, weighted MSE against the synthetic targets."""
    keep = np.flatnonzero(synth.wf > 0)
    if len(keep) == 0:
        raise EmptyLossError(NO_RELIABLE_DATA)
    params_e = with_new_head(params_p, cfg.meta_e, seed=cfg.seed + 1)
    data = Batch(np.asarray(windows)[keep], synth.targets[keep], synth.wf[keep])
    return train(params_e, data, cfg.stage2)


# -- bundle ------------------------------------------------------------------


@dataclass
class SiameseBundle:
    params_p: NetworkParams
    params_e: NetworkParams
    scaler: Scaler
    config: EstimatorConfig

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_params(self.params_p, d / "stage1.json")
        save_params(self.params_e, d / "stage2.json")
        (d / "scaler.json").write_text(json.dumps(self.scaler.to_dict(), indent=2) + "\n")
        (d / "config.json").write_text(json.dumps(self.config.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "SiameseBundle":
        d = Path(directory)
        for name in ("stage1.json", "stage2.json", "scaler.json", "config.json"):
            if not (d / name).exists():
                raise ConfigurationError(f"bundle file missing: {d / name}")
        params_p = load_params(d / "stage1.json")
        params_e = load_params(d / "stage2.json")
        scaler = Scaler.from_dict(json.loads((d / "scaler.json").read_text()))
        config = EstimatorConfig.from_dict(json.loads((d / "config.json").read_text()))
        return cls(params_p, params_e, scaler, config)


def estimate(windows: np.ndarray, bundle: SiameseBundle) -> np.ndarray:
    """Elasticity vectors ``(n, 9)`` (or ``(9,)`` for one window) from one stage-2 pass."""
    windows = np.asarray(windows, dtype=float)
    if windows.ndim == 2:
        return forward_sequence(windows, bundle.params_e)[0]
    return predict(bundle.params_e, windows)


@dataclass
class FitReport:
    stage1: TrainHistory
    stage2: TrainHistory
    n_samples: int
    n_kept: int
    mean_eta: float


def fit_siamese(
    samples: SampleSet, scaler: Scaler, cfg: EstimatorConfig, val: SampleSet | None = None
) -> tuple[SiameseBundle, SyntheticSet, FitReport]:
    """Stage 1, synthetic generation with filtering, then stage 2."""
    params_p, h1 = train_stage1(samples, scaler, cfg, val)
    synth = build_synthetic(samples, params_p, scaler, cfg)
    log.info("stage 1 done: mean eta %.4f, %d/%d samples kept", float(np.mean(synth.eta)), synth.n_kept, len(samples))
    params_e, h2 = train_stage2(samples.windows, synth, params_p, cfg)
    report = FitReport(h1, h2, len(samples), synth.n_kept, float(np.mean(synth.eta)))
    return SiameseBundle(params_p, params_e, scaler, cfg), synth, report


def encodings(params: NetworkParams, windows: np.ndarray) -> np.ndarray:
    """Batched tail encodings ``(n, t_out, n_cell)``."""
    return batch_encodings(params, windows)
