"""Base-model zoo: LeNet, AlexNet, VGG, ResNet and DenseNet in 1D and 2D."""

from __future__ import annotations

from typing import Any, Optional

import numpy as np

from .. import init
from ..nn import Module, count_parameters
from ..tensor import DEFAULT_DTYPE, Tensor
from .alexnet import AlexNet
from .densenet import DenseNet
from .lenet import LeNet
from .resnet import ResNet
from .vgg import VGG

MODEL_KINDS = (
    "lenet",
    "alexnet",
    "vgg11",
    "vgg13",
    "vgg16",
    "vgg19",
    "resnet18",
    "resnet34",
    "resnet50",
    "resnet101",
    "resnet152",
    "densenet121",
    "densenet161",
    "densenet169",
    "densenet201",
)

NUM_CLASSES = 5
SIGNAL_LENGTH = 178


def split_kind(kind: str) -> tuple[str, Optional[int]]:
    """``"resnet50"`` -> ``("resnet", 50)``; ``"lenet"`` -> ``("lenet", None)``."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
    family = kind.rstrip("0123456789")
    depth = kind[len(family) :]
    return family, int(depth) if depth else None


def input_shape(dim: int, batch: int = 1) -> tuple[int, ...]:
    if dim == 1:
        return (batch, 1, SIGNAL_LENGTH)
    if dim == 2:
        return (batch, 3, SIGNAL_LENGTH, SIGNAL_LENGTH)
    raise ValueError(f"dim must be 1 or 2, got {dim}")


def build_model(
    kind: str,
    dim: int,
    rng: Optional[np.random.Generator] = None,
    dtype: Any = DEFAULT_DTYPE,
    num_classes: int = NUM_CLASSES,
) -> Module:
    """Construct and initialise a base model.

    1D models take ``[N, 1, 178]`` signals, 2D models ``[N, 3, 178, 178]``
    images. LeNet, AlexNet and VGG draw every weight and bias from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)); ResNet and DenseNet use Kaiming-normal
    (fan-out) convolutions with unit/zero batch norm.
    """
    family, depth = split_kind(kind)
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    in_channels = 1 if dim == 1 else 3
    rng = np.random.default_rng(0) if rng is None else rng
    if family == "lenet":
        model: Module = LeNet(dim, in_channels, num_classes, dtype=dtype)
    elif family == "alexnet":
        model = AlexNet(dim, in_channels, num_classes, dtype=dtype)
    elif family == "vgg":
        model = VGG(depth, dim, in_channels, num_classes, dtype=dtype)
    elif family == "resnet":
        model = ResNet(depth, dim, in_channels, num_classes, dtype=dtype)
    else:
        model = DenseNet(depth, dim, in_channels, num_classes, dtype=dtype)

    if family in ("resnet", "densenet"):
        init.init_kaiming_normal_convs(model, rng)
    else:
        init.init_fan_in_uniform(model, rng)
    model.kind, model.dim = kind, dim
    return model


def model_forward(model: Module, x: Tensor, training: bool = False) -> Tensor:
    """Run ``model`` in the requested mode and return ``[N, num_classes]`` logits."""
    dim = getattr(model, "dim", None)
    if dim is not None and x.ndim != dim + 2:
        raise ValueError(f"{dim}D model expects input of rank {dim + 2}, got shape {x.shape}")
    model.train(training)
    return model(x)


__all__ = [
    "MODEL_KINDS",
    "AlexNet",
    "DenseNet",
    "LeNet",
    "ResNet",
    "VGG",
    "build_model",
    "count_parameters",
    "input_shape",
    "model_forward",
    "split_kind",
]
