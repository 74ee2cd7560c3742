"""Training runs: configuration, the epoch loop with best-validation selection, and evaluation."""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional

import numpy as np

from . import data as D
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .functional import cross_entropy_loss
from .models import MODEL_KINDS, build_model
from .nn import attach_rng, count_parameters
from .optim import Adam
from .s2i import CombinedModel, build_s2i, check_pairing, normalize_kind
from .tensor import NonFiniteError, _all_finite, no_grad

logger = logging.getLogger(__name__)

METRICS_HEADER = ("epoch", "train_loss", "train_acc", "val_acc", "seconds")
WORKERS_ENV = "S2I_WORKERS"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class RunConfig:
    data: Optional[str] = None
    s2i: str = "none"
    model: str = "lenet"
    dim: int = 1
    seed: int = 0
    split_seed: int = 0
    split: Optional[str] = None
    epochs: int = 100
    batch_size: int = 20
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    dtype: str = "float32"
    out_dir: Optional[str] = None

    def __post_init__(self) -> None:
        self.betas = tuple(float(b) for b in self.betas)  # JSON gives lists

    def validate(self) -> "RunConfig":
        self.s2i = normalize_kind(self.s2i)
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}")
        check_pairing(self.s2i, self.dim)
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ValueError("betas must be two values in [0, 1)")
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    seconds: float

    def csv_row(self) -> list[str]:
        return [
            str(self.epoch),
            f"{self.train_loss:.8f}",
            f"{self.train_acc:.6f}",
            f"{self.val_acc:.6f}",
            f"{self.seconds:.3f}",
        ]


@dataclass
class Evaluation:
    accuracy: float
    per_class: np.ndarray
    confusion: np.ndarray  # rows: true class, columns: predicted class

    def as_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class.tolist(),
            "confusion": self.confusion.tolist(),
        }


@dataclass
class TrainRun:
    config: RunConfig
    model: CombinedModel
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = float("nan")
    test: Optional[Evaluation] = None
    run_dir: Optional[Path] = None

    @property
    def test_acc(self) -> float:
        return self.test.accuracy if self.test else float("nan")

    def summary(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "test_acc": self.test_acc,
            "parameters": count_parameters(self.model),
        }


@contextlib.contextmanager
def worker_limit(workers: Optional[int] = None) -> Iterator[Optional[int]]:
    """Cap BLAS threads at ``workers`` (default: ``$S2I_WORKERS``, else unchanged)."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else None
    if workers is None:
        yield None
        return
    if workers < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=workers):
        yield workers


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for initialisation, shuffling and dropout, all from one seed."""
    init_ss, shuffle_ss, dropout_ss = np.random.SeedSequence(seed).spawn(3)
    return {
        "init": np.random.default_rng(init_ss),
        "shuffle": np.random.default_rng(shuffle_ss),
        "dropout": np.random.default_rng(dropout_ss),
    }


def build_combined(config: RunConfig, rng: np.random.Generator) -> CombinedModel:
    dtype = np.dtype(config.dtype)
    s2i = build_s2i(config.s2i, rng, dtype=dtype)
    base = build_model(config.model, config.dim, rng, dtype=dtype)
    return CombinedModel(s2i, base)


def load_dataset(config: RunConfig) -> D.Dataset:
    """Read ``config.data`` (``synthetic`` or ``synthetic:N`` for the stand-in) and split it."""
    ds = _raw_dataset(config)
    if config.split:
        return D.load_split_manifest(ds, config.split)
    return D.split_dataset(ds, seed=config.split_seed)


def predict(model: CombinedModel, x) -> np.ndarray:
    with no_grad():
        logits = model(x).data
    return logits.argmax(axis=1)  # first maximum wins ties


def evaluate(model: CombinedModel, ds: D.Dataset, split: str, batch_size: int = 20, dtype: Any = np.float32) -> Evaluation:
    model.eval()
    confusion = np.zeros((D.NUM_CLASSES, D.NUM_CLASSES), dtype=np.int64)
    for x, y in D.batches(ds, split, batch_size, dtype=dtype):
        np.add.at(confusion, (y, predict(model, x)), 1)
    totals = confusion.sum(axis=1)
    per_class = np.divide(np.diag(confusion), totals, out=np.zeros(D.NUM_CLASSES), where=totals > 0)
    return Evaluation(float(np.trace(confusion) / confusion.sum()), per_class, confusion)


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def train_run(config: RunConfig, dataset: Optional[D.Dataset] = None) -> TrainRun:
    """Train ``config.model`` behind ``config.s2i`` and report test accuracy of the best-validation epoch.

    When ``config.out_dir`` is set, the run directory receives ``config.json``,
    ``split.json``, ``metrics.csv``, ``checkpoint.{json,bin}`` and ``summary.json``.
    """
    config.validate()
    ds = dataset if dataset is not None else load_dataset(config)
    dtype = np.dtype(config.dtype)
    streams = seed_streams(config.seed)
    model = build_combined(config, streams["init"])
    attach_rng(model, streams["dropout"])
    optimizer = Adam(model.parameters(), lr=config.lr, betas=config.betas, eps=config.eps)

    run_dir = Path(config.out_dir) if config.out_dir else None
    metrics_fh = None
    writer = None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_json(run_dir / "config.json", config.to_dict())
        D.save_split_manifest(ds, run_dir / "split.json")
        metrics_fh = open(run_dir / "metrics.csv", "w", newline="")
        writer = csv.writer(metrics_fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)

    run = TrainRun(config, model, run_dir=run_dir)
    best_state = None
    try:
        for epoch in range(1, config.epochs + 1):
            model.train()
            t0 = time.perf_counter()
            loss_sum, correct, seen = 0.0, 0, 0
            batch_iter = D.batches(ds, "train", config.batch_size, shuffle=True, rng=streams["shuffle"], dtype=dtype)
            for b, (x, y) in enumerate(batch_iter, start=1):
                try:
                    logits = model(x)
                    loss = cross_entropy_loss(logits, y)
                    optimizer.zero_grad()
                    loss.backward()
                except NonFiniteError as exc:
                    raise TrainingDiverged(f"non-finite values at epoch {epoch}, batch {b}: {exc}") from exc
                with np.errstate(over="ignore", invalid="ignore"):
                    optimizer.step()
                # an overflowing second moment silently freezes a parameter, so check it too
                if not all(_all_finite(a) for a in (*(p.data for p in optimizer.params), *optimizer.v)):
                    raise TrainingDiverged(f"non-finite parameters or moments at epoch {epoch}, batch {b}")
                loss_sum += float(loss.data) * len(y)
                correct += int((logits.data.argmax(axis=1) == y).sum())
                seen += len(y)
            val = evaluate(model, ds, "val", config.batch_size, dtype)
            rec = EpochRecord(epoch, loss_sum / seen, correct / seen, val.accuracy, time.perf_counter() - t0)
            run.records.append(rec)
            logger.info(
                "epoch %d loss %.4f train %.4f val %.4f (%.1fs)",
                epoch, rec.train_loss, rec.train_acc, rec.val_acc, rec.seconds,
            )
            if writer is not None:
                writer.writerow(rec.csv_row())
                metrics_fh.flush()
            # strict improvement only: ties keep the earlier epoch
            if best_state is None or rec.val_acc > run.best_val_acc:
                run.best_epoch, run.best_val_acc = epoch, rec.val_acc
                best_state = {k: v.copy() for k, v in model.state_dict().items()}
                if run_dir is not None:
                    save_checkpoint(best_state, run_dir)
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    if best_state is None:
        # no training epochs: the initial parameters are the selected model
        run.best_epoch = 0
        run.best_val_acc = evaluate(model, ds, "val", config.batch_size, dtype).accuracy
        if run_dir is not None:
            save_checkpoint(model.state_dict(), run_dir)
    else:
        model.load_state_dict(best_state)
    run.test = evaluate(model, ds, "test", config.batch_size, dtype)
    if run_dir is not None:
        _write_json(run_dir / "summary.json", run.summary())
    return run


def load_run(run_dir: os.PathLike) -> tuple[RunConfig, CombinedModel, D.Dataset]:
    """Rebuild the model and split of a finished run from its directory."""
    run_dir = Path(run_dir)
    config = RunConfig.from_dict(json.loads((run_dir / "config.json").read_text())).validate()
    ds = D.load_split_manifest(_raw_dataset(config), run_dir / "split.json")
    model = build_combined(config, np.random.default_rng(0))
    state = load_checkpoint(run_dir)
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not fit {config.s2i}+{config.model}: {exc}") from exc
    return config, model, ds


def _raw_dataset(config: RunConfig) -> D.Dataset:
    if config.data is None:
        raise ValueError("no dataset given")
    return D.load_source(config.data)
