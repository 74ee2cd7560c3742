"""Epileptic-seizure CSV ingestion, stratified splitting and batching.

The expected file has one row per 178-sample segment followed by an integer
class label in 1..5. A header row and a leading non-numeric identifier column
(as in the UCI distribution) are both optional.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .tensor import DEFAULT_DTYPE, Tensor

SIGNAL_LENGTH = 178
CLASS_NAMES = ("Open", "Closed", "Healthy", "Tumor", "Epilepsy")
NUM_CLASSES = len(CLASS_NAMES)
DEFAULT_FRACTIONS = (0.76, 0.12, 0.12)
SPLITS = ("train", "val", "test")


class DataFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Dataset:
    """Signals ``[N, 178]`` (float64, untouched) with 0-based labels ``[N]``."""

    signals: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    seed: Optional[int] = None
    fractions: Optional[tuple[float, ...]] = None

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self, split: Optional[str] = None) -> np.ndarray:
        labels = self.labels if split is None else self.labels[self.split_indices(split)]
        return np.bincount(labels, minlength=NUM_CLASSES)

    def split_indices(self, split: str) -> np.ndarray:
        if split not in self.splits:
            raise KeyError(f"dataset has no {split!r} split")
        return self.splits[split]


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path: Union[str, os.PathLike]) -> Dataset:
    """Parse the seizure CSV. Errors name the offending (1-based) line."""
    rows: list[list[float]] = []
    labels: list[int] = []
    has_id: Optional[bool] = None
    with open(path, newline="", encoding="utf-8-sig") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and len(cells) > 1 and not any(_is_number(c) for c in cells[-2:]):
                continue  # header
            if has_id is None:
                has_id = not _is_number(cells[0])
            if has_id:
                cells = cells[1:]
            if len(cells) != SIGNAL_LENGTH + 1:
                raise DataFormatError(
                    f"expected {SIGNAL_LENGTH} amplitudes and a label, found {len(cells) - 1} amplitudes", lineno
                )
            try:
                values = [float(c) for c in cells[:-1]]
            except ValueError:
                bad = next(c for c in cells[:-1] if not _is_number(c))
                raise DataFormatError(f"non-numeric amplitude {bad!r}", lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise DataFormatError("non-finite amplitude", lineno)
            try:
                label = float(cells[-1])
            except ValueError:
                raise DataFormatError(f"non-numeric label {cells[-1]!r}", lineno) from None
            if label != int(label) or not 1 <= label <= NUM_CLASSES:
                raise DataFormatError(f"label {cells[-1]!r} is outside 1..{NUM_CLASSES}", lineno)
            rows.append(values)
            labels.append(int(label) - 1)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int64))


def _split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    sizes = [int(round(f * n)) for f in fractions[:-1]]
    sizes.append(n - sum(sizes))
    if sizes[-1] < 0:
        raise ValueError("fractions over-allocate the class")
    return sizes


def split_dataset(ds: Dataset, fractions: Sequence[float] = DEFAULT_FRACTIONS, seed: int = 0) -> Dataset:
    """Stratified train/val/test assignment.

    Each class's indices are shuffled with one generator seeded by ``seed``
    (classes in ascending order) and cut in proportion to ``fractions``.
    Index lists are stored sorted.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("need three non-negative fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)!r}")
    rng = np.random.default_rng(seed)
    parts: dict[str, list[np.ndarray]] = {s: [] for s in SPLITS}
    for c in range(NUM_CLASSES):
        idx = rng.permutation(np.flatnonzero(ds.labels == c))
        bounds = np.cumsum([0] + _split_sizes(len(idx), fractions))
        for s, lo, hi in zip(SPLITS, bounds[:-1], bounds[1:]):
            parts[s].append(idx[lo:hi])
    splits = {s: np.sort(np.concatenate(parts[s])).astype(np.int64) for s in SPLITS}
    return Dataset(ds.signals, ds.labels, splits, seed, fractions)


def manifest_dict(ds: Dataset) -> dict:
    return {
        "seed": ds.seed,
        "fractions": list(ds.fractions) if ds.fractions else None,
        "counts": {s: int(len(ds.splits[s])) for s in SPLITS},
        **{s: ds.splits[s].tolist() for s in SPLITS},
    }


def save_split_manifest(ds: Dataset, path: Union[str, os.PathLike]) -> None:
    Path(path).write_text(json.dumps(manifest_dict(ds), separators=(",", ":")) + "\n")


def load_split_manifest(ds: Dataset, path: Union[str, os.PathLike]) -> Dataset:
    """Apply a saved split to ``ds`` (which must be the same file it was made from)."""
    m = json.loads(Path(path).read_text())
    splits = {s: np.asarray(m[s], dtype=np.int64) for s in SPLITS}
    everything = np.concatenate(list(splits.values()))
    if len(everything) != len(ds) or len(np.unique(everything)) != len(ds):
        raise ValueError("split manifest does not partition this dataset")
    return Dataset(ds.signals, ds.labels, splits, m.get("seed"), tuple(m["fractions"]) if m.get("fractions") else None)


def batches(
    ds: Dataset,
    split: str,
    batch_size: int = 20,
    shuffle: bool = False,
    rng: Optional[np.random.Generator] = None,
    dtype=DEFAULT_DTYPE,
) -> Iterator[tuple[Tensor, np.ndarray]]:
    """Yield ``(signals [B, 1, 178], labels [B])``; shuffling draws one permutation per call."""
    idx = ds.split_indices(split)
    if len(idx) == 0:
        raise ValueError(f"split {split!r} is empty")
    if shuffle:
        if rng is None:
            raise ValueError("shuffling needs a generator")
        idx = idx[rng.permutation(len(idx))]
    for start in range(0, len(idx), batch_size):
        sel = idx[start : start + batch_size]
        x = ds.signals[sel].astype(dtype)[:, None, :]
        yield Tensor(x), ds.labels[sel]


def synthetic_dataset(n_per_class: int = 2300, seed: int = 0) -> Dataset:
    """Integer-valued stand-in with the seizure file's shape and class balance.

    Each class is a noisy oscillation with its own dominant frequency and
    amplitude. Only meant for exercising the pipeline when the real recordings
    are unavailable; it says nothing about accuracy on EEG.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(SIGNAL_LENGTH) / SIGNAL_LENGTH
    freqs = (10.0, 8.0, 5.0, 3.0, 14.0)
    amps = (40.0, 60.0, 35.0, 45.0, 180.0)
    signals, labels = [], []
    for c in range(NUM_CLASSES):
        phase = rng.uniform(0, 2 * np.pi, size=(n_per_class, 1))
        f = freqs[c] * rng.uniform(0.85, 1.15, size=(n_per_class, 1))
        a = amps[c] * rng.uniform(0.6, 1.4, size=(n_per_class, 1))
        noise = rng.normal(0, 25.0, size=(n_per_class, SIGNAL_LENGTH))
        x = a * np.sin(2 * np.pi * f * t + phase) + noise + rng.normal(0, 20, size=(n_per_class, 1))
        signals.append(np.round(x))
        labels.append(np.full(n_per_class, c))
    order = rng.permutation(n_per_class * NUM_CLASSES)
    return Dataset(np.concatenate(signals)[order], np.concatenate(labels)[order].astype(np.int64))


def load_source(source: Union[str, os.PathLike]) -> Dataset:
    """Load a CSV path, or ``synthetic`` / ``synthetic:N`` for the stand-in with N signals per class."""
    text = str(source)
    if text == "synthetic" or text.startswith("synthetic:"):
        _, _, n = text.partition(":")
        return synthetic_dataset(int(n) if n else 2300)
    return load_csv(source)


def write_csv(ds: Dataset, path: Union[str, os.PathLike], header: bool = True, ids: bool = True) -> None:
    """Write ``ds`` in the UCI layout (optionally without header/id column)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(([""] if ids else []) + [f"X{i + 1}" for i in range(SIGNAL_LENGTH)] + ["y"])
        for i, (sig, lab) in enumerate(zip(ds.signals, ds.labels)):
            row = [f"{v:g}" for v in sig] + [str(int(lab) + 1)]
            w.writerow(([f"X{i}.V1.{i}"] if ids else []) + row)
