# pygeofuse/nn/checkpoint.py

"""
Checkpoint container.

A numpy `.npz` archive with one float64 array per named Parameter (the
array header carries the shape) and a `__meta__` entry holding a JSON
document: {"format_version": 1, "model": <ModelConfig>, ...extra}.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..errors import DataError
from .model import GeoFuseModel, ModelConfig

FORMAT_VERSION = 1
META_KEY = "__meta__"


def save_checkpoint(
    model: GeoFuseModel,
    path: Union[str, Path],
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(metadata or {})
    meta.update({"format_version": FORMAT_VERSION, "model": model.config.to_dict()})
    arrays = model.state_dict()
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Return (state, metadata) of a checkpoint file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            state = {name: archive[name].copy() for name in archive.files if name != META_KEY}
            raw_meta = str(archive[META_KEY]) if META_KEY in archive.files else None
    except (OSError, ValueError) as exc:
        raise DataError(f"Cannot read checkpoint {path}: {exc}") from exc
    if raw_meta is None:
        raise DataError(f"{path} has no {META_KEY} entry")
    meta = json.loads(raw_meta)
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path} has format version {meta.get('format_version')}; expected {FORMAT_VERSION}")
    return state, meta


def load_model(path: Union[str, Path], config: Optional[ModelConfig] = None) -> GeoFuseModel:
    """
    Rebuild a model from a checkpoint.

    With `config` given, the checkpoint tensors must fit that configuration;
    a tensor of the wrong shape raises DataError naming it.
    """
    state, meta = load_checkpoint(path)
    model = GeoFuseModel(config or ModelConfig.from_dict(meta["model"]))
    model.load_state_dict(state)
    return model
