"""Command-line entry point: ``s2inet {split,train,eval,render,benchmark}``.

Failures print one line ``error: <category>: <reason>`` to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import data as D
from . import render as R
from .checkpoint import CheckpointError, load_checkpoint
from .models import MODEL_KINDS
from .nn import count_parameters
from .s2i import CNNS2I, S2I_KINDS, TRAINABLE, normalize_kind
from .train import RunConfig, TrainingDiverged, evaluate, load_dataset, load_run, train_run, worker_limit

EXIT_CODES = {"usage": 2, "config": 3, "data": 4, "checkpoint": 5, "diverged": 6, "io": 7}


class CLIError(Exception):
    def __init__(self, category: str, message: str) -> None:
        super().__init__(message)
        self.category = category


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would print the usage block
        raise CLIError("usage", message)


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


# -- split ---------------------------------------------------------------------


def cmd_split(args: argparse.Namespace) -> int:
    ds = D.split_dataset(D.load_source(args.data), fractions=args.fractions, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    D.save_split_manifest(ds, out / "split.json")
    counts = [len(ds.splits[s]) for s in D.SPLITS]
    print(" ".join(f"{s}={n}" for s, n in zip(D.SPLITS, counts)))
    print(f"wrote {out / 'split.json'}")
    return 0


# -- train / benchmark -----------------------------------------------------------

_OVERRIDES = ("data", "s2i", "model", "dim", "seed", "split_seed", "split", "epochs", "batch_size", "lr", "eps", "dtype")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration; flags given here override its values")
    p.add_argument("--data", help="dataset CSV (or 'synthetic[:N]' for the stand-in)")
    p.add_argument("--s2i", help=f"one of {', '.join(S2I_KINDS)}")
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--dim", type=int, choices=(1, 2))
    p.add_argument("--seed", type=int)
    p.add_argument("--split-seed", type=int)
    p.add_argument("--split", help="split manifest to use instead of splitting afresh")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--betas", type=float, nargs=2)
    p.add_argument("--eps", type=float)
    p.add_argument("--dtype", choices=("float32", "float64"), help="element width")
    p.add_argument("--workers", type=int, help="BLAS threads (default: $S2I_WORKERS)")


def effective_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise CLIError("config", f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise CLIError("config", f"{args.config} is not valid JSON: {exc}") from None
        if not isinstance(values, dict):
            raise CLIError("config", f"{args.config} must hold a JSON object")
    for key in _OVERRIDES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "betas", None) is not None:
        values["betas"] = args.betas
    if getattr(args, "out", None) is not None:
        values["out_dir"] = args.out
    try:
        return RunConfig.from_dict(values).validate()
    except (TypeError, ValueError) as exc:
        raise CLIError("config", str(exc)) from None


def cmd_train(args: argparse.Namespace) -> int:
    config = effective_config(args)
    if not config.out_dir:
        raise CLIError("config", "no output directory (use --out or out_dir in the config)")
    if config.data is None:
        raise CLIError("config", "no dataset (use --data or data in the config)")
    with worker_limit(args.workers):
        run = train_run(config)
    print(f"best_epoch={run.best_epoch} best_val_acc={run.best_val_acc:.6f} test_acc={run.test_acc:.6f}")
    print(f"wrote {run.run_dir}")
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = effective_config(args)
    config.out_dir = None  # timing only, nothing written
    if config.data is None:
        raise CLIError("config", "no dataset (use --data or data in the config)")
    ds = load_dataset(config)
    with worker_limit(args.workers):
        run = train_run(config, ds)
    n_train = len(ds.split_indices("train"))
    print(f"parameters={count_parameters(run.model)}")
    for rec in run.records:
        print(
            f"epoch={rec.epoch} seconds={rec.seconds:.3f} examples_per_second={n_train / rec.seconds:.1f} "
            f"train_loss={rec.train_loss:.8f} train_acc={rec.train_acc:.6f} val_acc={rec.val_acc:.6f}"
        )
    if run.records:
        mean = sum(r.seconds for r in run.records) / len(run.records)
        print(f"seconds_per_epoch={mean:.3f}")
    return 0


# -- eval ----------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        config, model, ds = load_run(args.run)
    except FileNotFoundError as exc:
        raise CLIError("io", f"{args.run}: {exc}") from None
    with worker_limit(args.workers):
        result = evaluate(model, ds, args.split, config.batch_size, np.dtype(config.dtype))
    print(f"split={args.split} accuracy={result.accuracy!r}")
    print(f"{'class':<10}{'n':>6}{'accuracy':>10}")
    for name, row, acc in zip(D.CLASS_NAMES, result.confusion, result.per_class):
        print(f"{name:<10}{int(row.sum()):>6}{acc:>10.4f}")
    out = Path(args.out) if args.out else Path(args.run) / f"confusion_{args.split}.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\predicted", *D.CLASS_NAMES])
        for name, row in zip(D.CLASS_NAMES, result.confusion):
            w.writerow([name, *map(int, row)])
    print(f"wrote {out}")
    return 0


# -- render --------------------------------------------------------------------


def load_s2i_module(checkpoint_dir: str, kind: str) -> CNNS2I:
    """Pull the ``s2i.*`` tensors of a run checkpoint into a fresh CNN module."""
    state = load_checkpoint(checkpoint_dir)
    sub = {k[len("s2i.") :]: v for k, v in state.items() if k.startswith("s2i.")}
    if not sub:
        raise CheckpointError(f"{checkpoint_dir} holds no S2I parameters")
    module = CNNS2I(1 if kind == "cnn1" else 2, dtype=next(iter(sub.values())).dtype)
    try:
        module.load_state_dict(sub)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not hold {kind} parameters: {exc}") from exc
    return module


def cmd_render(args: argparse.Namespace) -> int:
    try:
        kind = normalize_kind(args.s2i)
    except ValueError as exc:
        raise CLIError("usage", str(exc)) from None
    if kind == "none":
        raise CLIError("usage", "s2i=none produces no image")
    module = None
    if kind in TRAINABLE:
        if not args.checkpoint:
            raise CLIError("usage", f"rendering {kind} needs --checkpoint")
        module = load_s2i_module(args.checkpoint, kind)
    ds = D.load_source(args.data)
    if args.per_class:
        indices = [int(np.flatnonzero(ds.labels == c)[0]) for c in range(D.NUM_CLASSES) if np.any(ds.labels == c)]
    elif args.index is None:
        raise CLIError("usage", "give --index or --per-class")
    else:
        indices = [args.index]
    for i in indices:
        if not 0 <= i < len(ds):
            raise CLIError("data", f"index {i} out of range (dataset has {len(ds)} examples)")
        stem = f"{i}_{D.CLASS_NAMES[ds.labels[i]].lower()}"
        pgm, _ = R.render_example(ds.signals[i], kind, args.out, stem, module)
        print(f"wrote {pgm}")
    return 0


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="s2inet", description="Signal-to-image EEG classification experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per epoch")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("split", help="write a stratified split manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fractions", type=float, nargs=3, default=D.DEFAULT_FRACTIONS)
    p.add_argument("--out", required=True, help="directory for split.json")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one combined model")
    _add_config_flags(p)
    p.add_argument("--out", help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate the best checkpoint of a run")
    p.add_argument("--run", required=True)
    p.add_argument("--split", choices=D.SPLITS, default="test")
    p.add_argument("--out", help="confusion-matrix CSV (default: <run>/confusion_<split>.csv)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="write S2I images as PGM files")
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int)
    p.add_argument("--per-class", action="store_true", help="render the first example of every class")
    p.add_argument("--s2i", required=True)
    p.add_argument("--checkpoint", help="run directory holding trained CNN S2I parameters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("benchmark", help="time training epochs without writing a run")
    _add_config_flags(p)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "benchmark" and args.epochs is None:
            args.epochs = 1
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except CLIError as exc:
        category, message = exc.category, str(exc)
    except D.DataFormatError as exc:
        category, message = "data", str(exc)
    except CheckpointError as exc:
        category, message = "checkpoint", str(exc)
    except TrainingDiverged as exc:
        category, message = "diverged", str(exc)
    except FileNotFoundError as exc:
        category, message = "io", f"{exc.strerror}: {exc.filename}"
    except OSError as exc:
        category, message = "io", str(exc)
    except (KeyError, ValueError) as exc:
        category, message = "config", str(exc)
    print(f"error: {category}: {_one_line(message)}", file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
