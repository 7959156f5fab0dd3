"""Parameter containers for the single-cell-layer LSTM regressor.

Topology is fixed: ``input -> one LSTM cell layer -> one ReLU dense layer -> scalar``
applied at each of the last ``t_out`` steps.  Gate order in fused arrays is
forget, input, output, candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import ConfigurationError

GATES = ("f", "i", "o", "c")
CELL_BLOCKS = tuple(f"W_{g}" for g in GATES) + tuple(f"V_{g}" for g in GATES) + tuple(
    f"b_{g}" for g in GATES
)
HEAD_BLOCKS = ("W_h1", "b_h1", "W_h2", "b_h2")


@dataclass
class LstmCellParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    V_f: np.ndarray
    V_i: np.ndarray
    V_o: np.ndarray
    V_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    @property
    def n_cell(self) -> int:
        return self.W_f.shape[0]

    @property
    def n_in(self) -> int:
        return self.W_f.shape[1]

    def fused(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(Wx, Vh, b)`` with shapes ``(n_in, 4H)``, ``(H, 4H)``, ``(4H,)``."""
        Wx = np.ascontiguousarray(np.concatenate([self.W_f, self.W_i, self.W_o, self.W_c]).T)
        Vh = np.ascontiguousarray(np.concatenate([self.V_f, self.V_i, self.V_o, self.V_c]).T)
        b = np.concatenate([self.b_f, self.b_i, self.b_o, self.b_c])
        return Wx, Vh, b

    @classmethod
    def from_fused(cls, Wx: np.ndarray, Vh: np.ndarray, b: np.ndarray) -> "LstmCellParams":
        H = Vh.shape[0]
        Wt, Vt = Wx.T, Vh.T
        blocks = {}
        for k, g in enumerate(GATES):
            sl = slice(k * H, (k + 1) * H)
            blocks[f"W_{g}"] = np.ascontiguousarray(Wt[sl])
            blocks[f"V_{g}"] = np.ascontiguousarray(Vt[sl])
            blocks[f"b_{g}"] = b[sl].copy()
        return cls(**blocks)

    def validate(self) -> None:
        H, n_in = self.W_f.shape
        if H < 1 or n_in < 1:
            raise ConfigurationError("LSTM cell needs n_cell >= 1 and n_in >= 1")
        for g in GATES:
            _check_shape(f"W_{g}", getattr(self, f"W_{g}"), (H, n_in))
            _check_shape(f"V_{g}", getattr(self, f"V_{g}"), (H, H))
            _check_shape(f"b_{g}", getattr(self, f"b_{g}"), (H,))


@dataclass
class DenseHeadParams:
    W_h1: np.ndarray
    b_h1: np.ndarray
    W_h2: np.ndarray
    b_h2: np.ndarray  # shape (1,)

    def validate(self, n_den: int, n_head_in: int) -> None:
        _check_shape("W_h1", self.W_h1, (n_den, n_head_in))
        _check_shape("b_h1", self.b_h1, (n_den,))
        _check_shape("W_h2", self.W_h2, (1, n_den))
        _check_shape("b_h2", self.b_h2, (1,))


@dataclass(frozen=True)
class NetworkMeta:
    n_cell: int
    n_den: int
    n_in: int = 9
    t_in: int = 25
    t_out: int = 9
    # Appends a one-hot tail-step indicator to the dense head input.
    tail_position: bool = False

    @property
    def n_head_in(self) -> int:
        return self.n_cell + (self.t_out if self.tail_position else 0)

    def validate(self) -> None:
        if min(self.n_cell, self.n_den, self.n_in, self.t_in, self.t_out) < 1:
            raise ConfigurationError(f"all network sizes must be >= 1, got {self}")
        if self.t_out > self.t_in:
            raise ConfigurationError(f"t_out={self.t_out} exceeds t_in={self.t_in}")


@dataclass
class NetworkParams:
    cell: LstmCellParams
    head: DenseHeadParams
    meta: NetworkMeta

    def validate(self) -> "NetworkParams":
        self.meta.validate()
        # check W_f against meta first so a bad reference block is named correctly
        _check_shape("W_f", self.cell.W_f, (self.meta.n_cell, self.meta.n_in))
        self.cell.validate()
        self.head.validate(self.meta.n_den, self.meta.n_head_in)
        for name, arr in self.named_arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"non-finite values in {name}")
        return self

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {name: getattr(self.cell, name) for name in CELL_BLOCKS}
        out.update({name: getattr(self.head, name) for name in HEAD_BLOCKS})
        return out

    def copy(self) -> "NetworkParams":
        cell = LstmCellParams(**{f.name: getattr(self.cell, f.name).copy() for f in fields(self.cell)})
        head = DenseHeadParams(**{f.name: getattr(self.head, f.name).copy() for f in fields(self.head)})
        return NetworkParams(cell, head, self.meta)

    @classmethod
    def from_named(cls, arrays: dict[str, np.ndarray], meta: NetworkMeta) -> "NetworkParams":
        cell = LstmCellParams(**{k: arrays[k] for k in CELL_BLOCKS})
        head = DenseHeadParams(**{k: arrays[k] for k in HEAD_BLOCKS})
        return cls(cell, head, meta)


def _check_shape(name: str, arr: np.ndarray, shape: tuple[int, ...]) -> None:
    if np.shape(arr) != shape:
        raise ConfigurationError(f"{name} has shape {np.shape(arr)}, expected {shape}")


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    s = fan_in ** -0.5
    return rng.uniform(-s, s, size=shape)


def init_head(meta: NetworkMeta, rng: np.random.Generator) -> DenseHeadParams:
    return DenseHeadParams(
        W_h1=_uniform(rng, (meta.n_den, meta.n_head_in), meta.n_head_in),
        b_h1=np.zeros(meta.n_den),
        W_h2=_uniform(rng, (1, meta.n_den), meta.n_den),
        b_h2=np.zeros(1),
    )


def init_params(meta: NetworkMeta, seed: int = 0) -> NetworkParams:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init; forget bias starts at 1."""
    meta.validate()
    rng = np.random.default_rng(seed)
    H, n_in = meta.n_cell, meta.n_in
    blocks: dict[str, np.ndarray] = {}
    for g in GATES:
        blocks[f"W_{g}"] = _uniform(rng, (H, n_in), n_in)
    for g in GATES:
        blocks[f"V_{g}"] = _uniform(rng, (H, H), H)
    for g in GATES:
        blocks[f"b_{g}"] = np.full(H, 1.0) if g == "f" else np.zeros(H)
    return NetworkParams(LstmCellParams(**blocks), init_head(meta, rng), meta)


def with_new_head(params: NetworkParams, meta: NetworkMeta, seed: int) -> NetworkParams:
    """Copy the cell of ``params`` and attach a freshly initialised head sized by ``meta``."""
    if (meta.n_cell, meta.n_in) != (params.meta.n_cell, params.meta.n_in):
        raise ConfigurationError("new head meta must keep the cell dimensions")
    rng = np.random.default_rng(seed)
    cell = params.copy().cell
    return NetworkParams(cell, init_head(meta, rng), meta)


def zeros_like(params: NetworkParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.named_arrays().items()}


__all__ = [
    "CELL_BLOCKS",
    "HEAD_BLOCKS",
    "DenseHeadParams",
    "LstmCellParams",
    "NetworkMeta",
    "NetworkParams",
    "init_params",
    "init_head",
    "with_new_head",
    "zeros_like",
]
