"""Minimal sequence-learning engine: one LSTM cell layer plus a ReLU dense head."""

from .checkpoint import load_params, save_params
from .kernels import BACKEND
from .lstm import SequenceState, dense_head, forward_sequence, lstm_step, predict
from .params import DenseHeadParams, LstmCellParams, NetworkMeta, NetworkParams, init_params
from .train import (
    AdamState,
    Batch,
    TrainConfig,
    bptt_gradients,
    gradient_check,
    optimizer_step,
    train,
    weighted_mse,
)

__all__ = [
    "BACKEND",
    "AdamState",
    "Batch",
    "DenseHeadParams",
    "LstmCellParams",
    "NetworkMeta",
    "NetworkParams",
    "SequenceState",
    "TrainConfig",
    "bptt_gradients",
    "dense_head",
    "forward_sequence",
    "gradient_check",
    "init_params",
    "load_params",
    "lstm_step",
    "optimizer_step",
    "predict",
    "save_params",
    "train",
    "weighted_mse",
]
