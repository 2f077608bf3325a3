"""Lossless parameter archives.

A checkpoint is a single .npz holding every named parameter as its raw
array plus a JSON header with the precision, seed, architecture, model
configuration, and vocabulary, so loading rebuilds an identical model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import ModelConfig, build_model
from .text import Vocabulary

_META_KEY = "__meta__"


def save_checkpoint(path, model, extra: dict | None = None):
    meta = {
        "format": "mhka-checkpoint-v1",
        "arch": model.arch,
        "precision": model.cfg.dtype,
        "seed": model.seed,
        "config": model.cfg.to_dict(),
        "vocab": model.vocab.id_to_token,
    }
    if extra:
        meta.update(extra)
    arrays = {name: p.data for name, p in model.parameters().items()}
    if _META_KEY in arrays:
        raise CheckpointError(f"parameter name {_META_KEY} is reserved")
    np.savez(path, **arrays, **{_META_KEY: np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)})


def read_meta(path) -> dict:
    if not Path(path).exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        with np.load(path) as archive:
            return json.loads(archive[_META_KEY].tobytes().decode())
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"checkpoint {path} is not readable: {exc}") from exc


def load_checkpoint(path):
    """Rebuild the saved model, bit-exact in parameters."""
    meta = read_meta(path)
    try:
        cfg = ModelConfig.from_dict(meta["config"])
        vocab = Vocabulary(meta["vocab"])
        model = build_model(meta["arch"], cfg, vocab, seed=meta["seed"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint {path} has a bad header: {exc}") from exc
    params = model.parameters()
    with np.load(path) as archive:
        stored = set(archive.files) - {_META_KEY}
        if stored != set(params):
            missing = sorted(set(params) - stored)
            surplus = sorted(stored - set(params))
            raise CheckpointError(
                f"checkpoint {path} parameter mismatch: missing {missing}, surplus {surplus}"
            )
        for name, p in params.items():
            value = archive[name]
            if value.shape != p.data.shape:
                raise CheckpointError(
                    f"checkpoint {path}: {name} has shape {value.shape}, "
                    f"expected {p.data.shape}"
                )
            p.data = value.astype(cfg.np_dtype, copy=True)
    return model
