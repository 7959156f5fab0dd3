"""Two-stage dense-network estimator that sees only the anchor period's features.

Mirrors the sequence estimator: a load net maps the 9 anchor features to the
9 tail loads, its secant sensitivities become weighted synthetic targets, and
an elasticity net reusing the load net's first layer (frozen) is fitted to them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataio import LOAD_COL, PRICE_COL, SampleSet, Scaler
from ..errors import ConfigurationError, EmptyLossError, NumericError
from ..estimator import NO_RELIABLE_DATA, SyntheticSet, perturb_price, prediction_accuracy, secant_elasticities, wf_from_eta
from ..nn import TrainConfig
from ..nn.train import AdamState, adam_update, batch_schedule


@dataclass
class Snn2Config:
    load_shape: tuple[int, ...] = (9, 32, 32, 9)
    elasticity_shape: tuple[int, ...] = (9, 32, 48, 9)
    dlambda: float = 3.0
    eta_th: float = 0.8
    alpha: float = 0.5
    seed: int = 0
    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: TrainConfig = field(default_factory=lambda: TrainConfig(loss="weighted_mse"))

    def __post_init__(self):
        self.load_shape = tuple(self.load_shape)
        self.elasticity_shape = tuple(self.elasticity_shape)
        for doc in ("stage1", "stage2"):
            v = getattr(self, doc)
            if not isinstance(v, TrainConfig):
                setattr(self, doc, TrainConfig(**v))
        for s in (self.load_shape, self.elasticity_shape):
            if len(s) < 3 or s[0] != 9 or s[-1] != 9:
                raise ConfigurationError(f"dense shape {s} must map 9 features to 9 outputs")
        if self.load_shape[1] != self.elasticity_shape[1]:
            raise ConfigurationError("both nets must share the first hidden width")


# -- a small dense network ------------------------------------------------------


def init_mlp(shape, seed: int) -> list[np.ndarray]:
    """Flat list ``[W1, b1, W2, b2, ...]`` with uniform(+-1/sqrt(fan_in)) weights and zero biases."""
    rng = np.random.default_rng(seed)
    out = []
    for fan_in, fan_out in zip(shape[:-1], shape[1:]):
        s = fan_in ** -0.5
        out += [rng.uniform(-s, s, size=(fan_out, fan_in)), np.zeros(fan_out)]
    return out


def mlp_forward(layers: list[np.ndarray], X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """ReLU hidden layers, linear output; returns the output and each layer's input."""
    acts = [X]
    a = X
    n = len(layers) // 2
    for k in range(n):
        z = a @ layers[2 * k].T + layers[2 * k + 1]
        a = np.maximum(z, 0.0) if k < n - 1 else z
        if k < n - 1:
            acts.append(a)
    return a, acts


def mlp_loss_grads(layers, X, T, w) -> tuple[float, list[np.ndarray]]:
    """``sum_i w_i |y_i - t_i|^2 / (sum(w) * k)`` and its gradients."""
    y, acts = mlp_forward(layers, X)
    denom = float(np.sum(w)) * y.shape[1]
    if not denom > 0:
        raise EmptyLossError("all sample weights are zero (fully filtered batch)")
    diff = y - T
    loss = float(np.sum(w[:, None] * diff * diff) / denom)
    g = 2.0 * w[:, None] * diff / denom
    grads = [None] * len(layers)
    for k in range(len(layers) // 2 - 1, -1, -1):
        grads[2 * k] = g.T @ acts[k]
        grads[2 * k + 1] = g.sum(axis=0)
        if k > 0:
            g = (g @ layers[2 * k]) * (acts[k] > 0)
    return loss, grads


def train_mlp(layers, X, T, w, cfg: TrainConfig, frozen: int = 0) -> tuple[list[np.ndarray], list[float]]:
    """Adam over seeded mini-batches; the first ``frozen`` arrays are left untouched."""
    arrays = {str(k): a.copy() for k, a in enumerate(layers)}
    names = tuple(str(k) for k in range(frozen, len(layers)))
    state = AdamState()
    losses = []
    for it, idx in enumerate(batch_schedule(len(X), cfg)):
        cur = [arrays[str(k)] for k in range(len(layers))]
        loss, grads = mlp_loss_grads(cur, X[idx], T[idx], w[idx])
        if not np.isfinite(loss):
            raise NumericError(f"training diverged at iteration {it}", index=it)
        arrays, state = adam_update(arrays, {str(k): g for k, g in enumerate(grads)}, state, cfg.learning_rate, names)
        losses.append(loss)
    return [arrays[str(k)] for k in range(len(layers))], losses


# -- the two stages -----------------------------------------------------------


def anchor_features(samples: SampleSet) -> np.ndarray:
    """Scaled features of the anchor period only, ``(n, 9)``."""
    return np.ascontiguousarray(samples.windows[:, samples.t_in - samples.t_out, :])


@dataclass
class Snn2Model:
    load_net: list[np.ndarray]
    elasticity_net: list[np.ndarray]
    scaler: Scaler
    synthetic: SyntheticSet

    def predict_loads(self, X: np.ndarray) -> np.ndarray:
        return self.scaler.unscale_column(mlp_forward(self.load_net, X)[0], LOAD_COL)

    def estimate(self, X: np.ndarray) -> np.ndarray:
        return mlp_forward(self.elasticity_net, X)[0]


def snn2_fit(samples: SampleSet, scaler: Scaler, cfg: Snn2Config | None = None) -> Snn2Model:
    cfg = cfg or Snn2Config()
    if len(samples) == 0:
        raise ConfigurationError("2SNN needs at least one sample")
    X = anchor_features(samples)
    T = scaler.scale_column(samples.targets, LOAD_COL)
    load_net, _ = train_mlp(init_mlp(cfg.load_shape, cfg.seed), X, T, np.ones(len(X)), cfg.stage1)

    def fn(Z):
        return scaler.unscale_column(mlp_forward(load_net, Z)[0], LOAD_COL)

    up = X.copy()
    down = X.copy()
    up[:, PRICE_COL] = perturb_price(X[:, PRICE_COL], scaler, cfg.dlambda)
    down[:, PRICE_COL] = perturb_price(X[:, PRICE_COL], scaler, -cfg.dlambda)
    targets = secant_elasticities(fn(up), fn(down), samples.anchor_prices, samples.targets, cfg.dlambda)
    eta = prediction_accuracy(fn(X), samples.targets)
    wf = wf_from_eta(eta, cfg.eta_th, cfg.alpha)
    synth = SyntheticSet(targets, eta, wf)
    keep = np.flatnonzero(wf > 0)
    if len(keep) == 0:
        raise EmptyLossError(NO_RELIABLE_DATA)
    net = init_mlp(cfg.elasticity_shape, cfg.seed + 1)
    net[0] = load_net[0].copy()
    net[1] = load_net[1].copy()
    net, _ = train_mlp(net, X[keep], targets[keep], wf[keep], cfg.stage2, frozen=2)
    return Snn2Model(load_net, net, scaler, synth)


def snn2_estimate(train: SampleSet, test: SampleSet, scaler: Scaler, cfg: Snn2Config | None = None):
    """Fit on ``train`` and return ``(estimates for test (n, 9), model)``."""
    model = snn2_fit(train, scaler, cfg)
    return model.estimate(anchor_features(test)), model
