"""JSON checkpoints for :class:`NetworkParams`.

Floats are written with ``repr`` precision (shortest round-trip decimal), so
save -> load reproduces every 64-bit value exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from ..errors import DataError
from .params import CELL_BLOCKS, HEAD_BLOCKS, NetworkMeta, NetworkParams

FORMAT = "elastiq-lstm/1"


def params_to_dict(params: NetworkParams) -> dict:
    return {
        "format": FORMAT,
        "meta": asdict(params.meta),
        "weights": {k: v.tolist() for k, v in params.named_arrays().items()},
    }


def params_from_dict(doc: dict) -> NetworkParams:
    if not isinstance(doc, dict):
        raise DataError("checkpoint root must be an object", field="<root>")
    meta_doc = doc.get("meta")
    if not isinstance(meta_doc, dict):
        raise DataError("missing or malformed 'meta'", field="meta")
    allowed = {f.name for f in fields(NetworkMeta)}
    try:
        meta = NetworkMeta(**{k: v for k, v in meta_doc.items() if k in allowed})
    except TypeError as exc:
        raise DataError(f"malformed 'meta': {exc}", field="meta") from exc
    weights = doc.get("weights")
    if not isinstance(weights, dict):
        raise DataError("missing or malformed 'weights'", field="weights")
    arrays = {}
    for name in CELL_BLOCKS + HEAD_BLOCKS:
        if name not in weights:
            raise DataError(f"missing weight array {name!r}", field=name)
        try:
            arr = np.array(weights[name], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DataError(f"weight array {name!r} is not a numeric array: {exc}", field=name) from exc
        arrays[name] = arr
    params = NetworkParams.from_named(arrays, meta)
    params.validate()
    return params


def save_params(params: NetworkParams, path) -> None:
    params.validate()
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load_params(path) -> NetworkParams:
    """Read a checkpoint; raises :class:`DataError` on malformed content and
    :class:`ConfigurationError` when array shapes disagree with ``meta``."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint {path} is not valid JSON: {exc}", field="<root>") from exc
    return params_from_dict(doc)


__all__ = ["save_params", "load_params", "params_to_dict", "params_from_dict"]
