"""Losses, hand-derived BPTT gradients, Adam, the mini-batch loop and gradient checking."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from ..errors import ConfigurationError, EmptyLossError, NumericError
from . import kernels
from .lstm import _time_major, batch_encodings, head_inputs
from .params import CELL_BLOCKS, HEAD_BLOCKS, DenseHeadParams, LstmCellParams, NetworkParams

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 256
    max_iters: int = 5000
    learning_rate: float = 1e-3
    seed: int = 0
    loss: Literal["mse", "weighted_mse"] = "mse"
    trainable_scope: Literal["all", "head-only"] = "all"
    log_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_iters < 1:
            raise ConfigurationError("batch_size and max_iters must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.loss not in ("mse", "weighted_mse"):
            raise ConfigurationError(f"unknown loss {self.loss!r}")
        if self.trainable_scope not in ("all", "head-only"):
            raise ConfigurationError(f"unknown trainable_scope {self.trainable_scope!r}")


@dataclass
class Batch:
    """Stacked windows ``(B, t_in, n_in)``, targets ``(B, t_out)``, per-sample weights ``(B,)``."""

    inputs: np.ndarray
    targets: np.ndarray
    weights: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.inputs)

    def take(self, idx) -> "Batch":
        w = None if self.weights is None else self.weights[idx]
        return Batch(self.inputs[idx], self.targets[idx], w)


def weighted_mse(preds, targets, weights) -> float:
    """``sum(w * (pred - target)^2) / sum(w)``."""
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not preds.shape == targets.shape == weights.shape:
        raise ConfigurationError("preds, targets and weights must have equal shapes")
    if np.any(weights < 0):
        raise ConfigurationError("weights must be non-negative")
    total = weights.sum()
    if not total > 0:
        raise EmptyLossError("all sample weights are zero (fully filtered batch)")
    return float(np.sum(weights * (preds - targets) ** 2) / total)


def _sample_weights(batch: Batch, cfg: TrainConfig) -> np.ndarray:
    if cfg.loss == "mse" or batch.weights is None:
        return np.ones(len(batch))
    w = np.asarray(batch.weights, dtype=float)
    if np.any(w < 0):
        raise ConfigurationError("sample weights must be non-negative")
    if not w.sum() > 0:
        raise EmptyLossError("all sample weights are zero (fully filtered batch)")
    return w


def _head_loss_and_grads(E, head: DenseHeadParams, targets, w):
    """Loss and gradients of the dense head given head inputs ``E (B, t_out, n_head_in)``.

    Also returns ``dE``, the gradient w.r.t. the head inputs.
    """
    B, t_out, n_e = E.shape
    Z1 = E @ head.W_h1.T + head.b_h1
    A1 = np.maximum(Z1, 0.0)
    y = (A1 @ head.W_h2.T)[..., 0] + head.b_h2[0]
    err = y - targets
    if not np.all(np.isfinite(err)):
        bad = int(np.argmax(~np.all(np.isfinite(err), axis=1)))
        raise NumericError(f"non-finite prediction for sample {bad}", index=bad)
    denom = t_out * w.sum()
    loss = float(np.sum(w[:, None] * err * err) / denom)
    dy = (2.0 / denom) * w[:, None] * err
    n_den = A1.shape[-1]
    dW2 = (dy.reshape(1, -1) @ A1.reshape(-1, n_den))
    db2 = np.array([dy.sum()])
    dZ1 = dy[..., None] * head.W_h2[0] * (Z1 > 0.0)
    dZ1f = dZ1.reshape(-1, n_den)
    dW1 = dZ1f.T @ E.reshape(-1, n_e)
    db1 = dZ1f.sum(axis=0)
    dE = dZ1 @ head.W_h1
    return loss, DenseHeadParams(dW1, db1, dW2, db2), dE


def loss_and_gradients(
    params: NetworkParams, batch: Batch, cfg: TrainConfig, backend: str | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    if len(batch) == 0:
        raise ConfigurationError("empty batch")
    meta = params.meta
    w = _sample_weights(batch, cfg)
    targets = np.asarray(batch.targets, dtype=float)
    if targets.shape != (len(batch), meta.t_out):
        raise ConfigurationError(f"targets shape {targets.shape} != ({len(batch)}, {meta.t_out})")
    X = _time_major(batch.inputs, meta)
    forward, backward = kernels.get_backend(backend)
    Wx, Vh, b = params.cell.fused()
    gates, C, Hs, TC = forward(X, Wx, Vh, b)
    first = meta.t_in - meta.t_out
    h_tail = Hs[first + 1 :].transpose(1, 0, 2)
    E = head_inputs(h_tail, meta)
    loss, dhead, dE = _head_loss_and_grads(E, params.head, targets, w)
    grads = {k: getattr(dhead, k) for k in HEAD_BLOCKS}
    if cfg.trainable_scope == "head-only":
        grads.update({k: np.zeros_like(getattr(params.cell, k)) for k in CELL_BLOCKS})
        return loss, grads
    dH = np.zeros_like(TC)
    dH[first:] = dE[..., : meta.n_cell].transpose(1, 0, 2)
    dWx, dVh, db = backward(X, Vh, gates, C, Hs, TC, np.ascontiguousarray(dH))
    dcell = LstmCellParams.from_fused(dWx, dVh, db)
    grads.update({k: getattr(dcell, k) for k in CELL_BLOCKS})
    return loss, grads


def bptt_gradients(batch: Batch, params: NetworkParams, cfg: TrainConfig) -> dict[str, np.ndarray]:
    """Exact gradients of the configured loss w.r.t. every parameter block.

    Frozen blocks (cell parameters under ``head-only``) come back as zeros.
    """
    return loss_and_gradients(params, batch, cfg)[1]


def batch_loss(params: NetworkParams, batch: Batch, cfg: TrainConfig) -> float:
    meta = params.meta
    w = _sample_weights(batch, cfg)
    enc = batch_encodings(params, batch.inputs)
    return _head_loss_and_grads(head_inputs(enc, meta), params.head, batch.targets, w)[0]


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(
    arrays: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    trainable: tuple[str, ...] | None = None,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam step on a named set of arrays; names outside ``trainable`` pass through untouched."""
    names = tuple(arrays) if trainable is None else trainable
    t = state.step + 1
    m, v = dict(state.m), dict(state.v)
    out = dict(arrays)
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for k in names:
        g = grads[k]
        if g.shape != arrays[k].shape:
            raise ConfigurationError(f"gradient {k} shape {g.shape} != {arrays[k].shape}")
        m[k] = state.beta1 * m.get(k, 0.0) + (1.0 - state.beta1) * g
        v[k] = state.beta2 * v.get(k, 0.0) + (1.0 - state.beta2) * g * g
        out[k] = arrays[k] - lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)
    return out, AdamState(state.beta1, state.beta2, state.eps, t, m, v)


def trainable_names(params: NetworkParams, cfg: TrainConfig) -> tuple[str, ...]:
    return HEAD_BLOCKS if cfg.trainable_scope == "head-only" else CELL_BLOCKS + HEAD_BLOCKS


def optimizer_step(
    params: NetworkParams, grads: dict[str, np.ndarray], opt_state: AdamState, cfg: TrainConfig
) -> tuple[NetworkParams, AdamState]:
    arrays, state = adam_update(
        params.named_arrays(), grads, opt_state, cfg.learning_rate, trainable_names(params, cfg)
    )
    return NetworkParams.from_named(arrays, params.meta), state


# -- training loop -----------------------------------------------------------


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[tuple[int, float]] = field(default_factory=list)


def batch_schedule(n: int, cfg: TrainConfig):
    """Yield index arrays: per-epoch permutations cut into chunks, ``max_iters`` in total."""
    rng = np.random.default_rng(cfg.seed)
    it = 0
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            yield perm[start : start + cfg.batch_size]
            it += 1
            if it >= cfg.max_iters:
                return


def train(
    params: NetworkParams,
    data: Batch,
    cfg: TrainConfig,
    val: Batch | None = None,
    val_every: int = 500,
    on_step: Callable[[int, float], None] | None = None,
) -> tuple[NetworkParams, TrainHistory]:
    """Run exactly ``cfg.max_iters`` Adam steps over seeded mini-batches."""
    if len(data) == 0:
        raise ConfigurationError("no training samples")
    params = params.copy()
    history = TrainHistory()
    state = AdamState()
    names = trainable_names(params, cfg)
    meta = params.meta
    cached = None
    if cfg.trainable_scope == "head-only":
        # cell is frozen, so tail encodings never change
        cached = head_inputs(batch_encodings(params, data.inputs), meta)
    arrays = params.named_arrays()
    for it, idx in enumerate(batch_schedule(len(data), cfg)):
        sub = data.take(idx)
        if cached is not None:
            w = _sample_weights(sub, cfg)
            head = DenseHeadParams(*(arrays[k] for k in HEAD_BLOCKS))
            loss, dhead, _ = _head_loss_and_grads(cached[idx], head, np.asarray(sub.targets, float), w)
            grads = {k: getattr(dhead, k) for k in HEAD_BLOCKS}
        else:
            loss, grads = loss_and_gradients(NetworkParams.from_named(arrays, meta), sub, cfg)
        if not np.isfinite(loss):
            raise NumericError(f"training diverged at iteration {it}", index=it)
        arrays, state = adam_update(arrays, grads, state, cfg.learning_rate, names)
        history.train_loss.append(loss)
        if on_step is not None:
            on_step(it, loss)
        if val is not None and ((it + 1) % val_every == 0 or it + 1 == cfg.max_iters):
            vl = batch_loss(NetworkParams.from_named(arrays, meta), val, cfg)
            history.val_loss.append((it + 1, vl))
        if cfg.log_every and (it + 1) % cfg.log_every == 0:
            log.info("iter %d loss %.6g", it + 1, loss)
    return NetworkParams.from_named(arrays, meta), history


# -- gradient checking -------------------------------------------------------


def gradient_check(
    params: NetworkParams,
    batch: Batch,
    eps: float = 1e-5,
    cfg: TrainConfig | None = None,
    n_params: int = 60,
    seed: int = 0,
    grad_fn: Callable[[Batch, NetworkParams, TrainConfig], dict[str, np.ndarray]] | None = None,
    floor: float = 1e-8,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks a seeded random subset of at least ``n_params`` entries drawn
    round-robin from every trainable block.
    """
    if not eps > 0:
        raise ConfigurationError("eps must be > 0")
    cfg = cfg or TrainConfig()
    grad_fn = grad_fn or bptt_gradients
    analytic = grad_fn(batch, params, cfg)
    names = trainable_names(params, cfg)
    rng = np.random.default_rng(seed)
    picks: list[tuple[str, tuple[int, ...]]] = []
    k = 0
    while len(picks) < max(n_params, len(names)):
        name = names[k % len(names)]
        arr = params.named_arrays()[name]
        picks.append((name, tuple(int(rng.integers(s)) for s in arr.shape)))
        k += 1
    worst = 0.0
    for name, idx in picks:
        work = params.copy()
        arr = work.named_arrays()[name]
        orig = arr[idx]
        arr[idx] = orig + eps
        lp = batch_loss(work, batch, cfg)
        arr[idx] = orig - eps
        lm = batch_loss(work, batch, cfg)
        numeric = (lp - lm) / (2 * eps)
        a = analytic[name][idx]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, rel)
    return worst
