"""Checkpoint files: a JSON manifest plus one raw little-endian blob.

Manifest layout::

    {"format": "s2inet-checkpoint", "version": 1, "blob": "checkpoint.bin",
     "blob_length": 1234,
     "tensors": [{"name": ..., "shape": [...], "element_width": 32,
                  "offset": 0, "length": 456}, ...]}

``element_width`` is in bits, ``offset``/``length`` in bytes.
"""

from __future__ import annotations

import json
import os
from collections import OrderedDict
from pathlib import Path
from typing import Mapping, Union

import numpy as np

FORMAT = "s2inet-checkpoint"
VERSION = 1
_DTYPES = {32: np.dtype("<f4"), 64: np.dtype("<f8")}


class CheckpointError(ValueError):
    """Manifest and blob disagree, or the files are missing or malformed."""


PathLike = Union[str, os.PathLike]


def save_checkpoint(state: Mapping[str, np.ndarray], directory: PathLike, name: str = "checkpoint") -> Path:
    """Write ``<name>.json`` and ``<name>.bin`` into ``directory``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    blob_path = directory / f"{name}.bin"
    entries = []
    offset = 0
    with open(blob_path, "wb") as fh:
        for key, arr in state.items():
            arr = np.asarray(arr)
            width = arr.dtype.itemsize * 8
            if width not in _DTYPES or arr.dtype.kind != "f":
                raise CheckpointError(f"{key}: only float32/float64 tensors can be saved, got {arr.dtype}")
            raw = np.ascontiguousarray(arr, dtype=_DTYPES[width]).tobytes()
            fh.write(raw)
            entries.append(
                {"name": key, "shape": list(arr.shape), "element_width": width, "offset": offset, "length": len(raw)}
            )
            offset += len(raw)
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "blob": blob_path.name,
        "blob_length": offset,
        "tensors": entries,
    }
    manifest_path = directory / f"{name}.json"
    manifest_path.write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest_path


def load_checkpoint(directory: PathLike, name: str = "checkpoint") -> "OrderedDict[str, np.ndarray]":
    directory = Path(directory)
    manifest_path = directory / f"{name}.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError as exc:
        raise CheckpointError(f"missing checkpoint manifest {manifest_path}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable checkpoint manifest {manifest_path}: {exc}") from exc
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"{manifest_path} is not an {FORMAT} manifest")
    blob_path = directory / manifest["blob"]
    try:
        blob = blob_path.read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"missing checkpoint blob {blob_path}") from exc
    if len(blob) != manifest["blob_length"]:
        raise CheckpointError(
            f"blob {blob_path.name} holds {len(blob)} bytes but the manifest expects {manifest['blob_length']}"
        )
    state: OrderedDict[str, np.ndarray] = OrderedDict()
    for entry in manifest["tensors"]:
        dtype = _DTYPES.get(entry["element_width"])
        if dtype is None:
            raise CheckpointError(f"{entry['name']}: unsupported element width {entry['element_width']}")
        shape = tuple(entry["shape"])
        start, length = entry["offset"], entry["length"]
        if length != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize or start + length > len(blob):
            raise CheckpointError(f"{entry['name']}: byte range does not match shape {shape}")
        arr = np.frombuffer(blob, dtype=dtype, count=length // dtype.itemsize, offset=start)
        state[entry["name"]] = arr.reshape(shape).astype(dtype.newbyteorder("="))
    return state
