"""Forward evaluation of the LSTM regressor: single steps, single windows, batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericError
from . import kernels
from .params import DenseHeadParams, LstmCellParams, NetworkMeta, NetworkParams


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class SequenceState:
    c: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, n_cell: int) -> "SequenceState":
        return cls(np.zeros(n_cell), np.zeros(n_cell))


def lstm_step(x: np.ndarray, state: SequenceState, params: LstmCellParams) -> SequenceState:
    """Advance the cell by one step and return the new ``(c_t, h_t)``."""
    x = np.asarray(x, dtype=float)
    H, n_in = params.W_f.shape
    if x.shape != (n_in,) or state.c.shape != (H,) or state.h.shape != (H,):
        raise ConfigurationError(
            f"lstm_step expects x({n_in},), state({H},); got x{x.shape}, c{state.c.shape}, h{state.h.shape}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(state.c)) and np.all(np.isfinite(state.h))):
        raise NumericError("non-finite input to lstm_step")
    h_prev = state.h
    f = sigmoid(params.W_f @ x + params.V_f @ h_prev + params.b_f)
    i = sigmoid(params.W_i @ x + params.V_i @ h_prev + params.b_i)
    o = sigmoid(params.W_o @ x + params.V_o @ h_prev + params.b_o)
    c = f * state.c + i * np.tanh(params.W_c @ x + params.V_c @ h_prev + params.b_c)
    h = o * np.tanh(c)
    return SequenceState(c, h)


def head_inputs(h_tail: np.ndarray, meta: NetworkMeta) -> np.ndarray:
    """Dense-head input for tail encodings ``(..., t_out, n_cell)``."""
    if not meta.tail_position:
        return h_tail
    eye = np.broadcast_to(np.eye(meta.t_out), h_tail.shape[:-1] + (meta.t_out,))
    return np.concatenate([h_tail, eye], axis=-1)


def dense_head(e: np.ndarray, head: DenseHeadParams) -> np.ndarray:
    """ReLU hidden layer followed by a linear scalar output, over the last axis of ``e``."""
    a = np.maximum(e @ head.W_h1.T + head.b_h1, 0.0)
    return (a @ head.W_h2.T)[..., 0] + head.b_h2[0]


def forward_sequence(window: np.ndarray, params: NetworkParams) -> tuple[np.ndarray, np.ndarray]:
    """Unfold over one ``(t_in, n_in)`` window.

    Returns the ``t_out`` scalar outputs and the ``(t_out, n_cell)`` encoding
    vectors recorded at the tail steps.
    """
    meta = params.meta
    window = np.asarray(window, dtype=float)
    if window.shape != (meta.t_in, meta.n_in):
        raise ConfigurationError(f"window shape {window.shape} != ({meta.t_in}, {meta.n_in})")
    state = SequenceState.zeros(meta.n_cell)
    enc = np.empty((meta.t_out, meta.n_cell))
    first_tail = meta.t_in - meta.t_out
    for t in range(meta.t_in):
        state = lstm_step(window[t], state, params.cell)
        if t >= first_tail:
            enc[t - first_tail] = state.h
    return dense_head(head_inputs(enc, meta), params.head), enc


def _time_major(inputs: np.ndarray, meta: NetworkMeta) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 3 or inputs.shape[1:] != (meta.t_in, meta.n_in):
        raise ConfigurationError(f"batch shape {inputs.shape} != (B, {meta.t_in}, {meta.n_in})")
    return np.ascontiguousarray(inputs.transpose(1, 0, 2))


def batch_encodings(params: NetworkParams, inputs: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Tail encodings ``(B, t_out, n_cell)`` for a stack of windows."""
    meta = params.meta
    X = _time_major(inputs, meta)
    forward, _ = kernels.get_backend(backend)
    Wx, Vh, b = params.cell.fused()
    _, _, Hs, _ = forward(X, Wx, Vh, b)
    return np.ascontiguousarray(Hs[meta.t_in - meta.t_out + 1 :].transpose(1, 0, 2))


def predict(params: NetworkParams, inputs: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Scalar outputs ``(B, t_out)`` for a stack of windows."""
    enc = batch_encodings(params, inputs, backend)
    return dense_head(head_inputs(enc, params.meta), params.head)
