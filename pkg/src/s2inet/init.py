"""Parameter initialisers."""

from __future__ import annotations

import math

import numpy as np

from . import nn
from .tensor import Tensor


def kaiming_uniform_bound(fan_in: int, a: float = 0.0) -> float:
    """Half-width ``c = sqrt(6 / ((1 + a^2) * fan_in))`` of the Kaiming-uniform range."""
    if fan_in < 1:
        raise ValueError("fan_in must be positive")
    return math.sqrt(6.0 / ((1.0 + a * a) * fan_in))


def _uniform(rng: np.random.Generator, bound: float, shape: tuple[int, ...], dtype: np.dtype) -> np.ndarray:
    # drawn directly in the parameter dtype; float64 temporaries of the
    # largest classifier weights would not fit in a small memory budget
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        dtype = np.dtype(np.float64)
    u = rng.random(shape, dtype=dtype)
    u *= dtype.type(2 * bound)
    u -= dtype.type(bound)
    return u


def kaiming_uniform_(t: Tensor, fan_in: int, rng: np.random.Generator, a: float = 0.0) -> None:
    t.data = _uniform(rng, kaiming_uniform_bound(fan_in, a), t.shape, t.dtype)


def kaiming_normal_fan_out_(t: Tensor, fan_out: int, rng: np.random.Generator) -> None:
    # ReLU gain sqrt(2)
    std = math.sqrt(2.0 / fan_out)
    z = rng.standard_normal(t.shape, dtype=t.dtype)
    z *= t.dtype.type(std)
    t.data = z


def fan_in_uniform_(t: Tensor, fan_in: int, rng: np.random.Generator) -> None:
    t.data = _uniform(rng, 1.0 / math.sqrt(fan_in), t.shape, t.dtype)


def init_fan_in_uniform(module: nn.Module, rng: np.random.Generator) -> None:
    """U(-1/sqrt(k), 1/sqrt(k)) for every conv and linear weight and bias (k = fan-in)."""
    for m in module.modules():
        if isinstance(m, (nn.Conv, nn.Linear)):
            fan_in_uniform_(m.weight, m.fan_in, rng)
            if m.bias is not None:
                fan_in_uniform_(m.bias, m.fan_in, rng)


def init_kaiming_uniform_convs(module: nn.Module, rng: np.random.Generator, a: float = 0.0) -> None:
    """Kaiming-uniform conv weights; conv biases and linear layers get U(+-1/sqrt(k))."""
    for m in module.modules():
        if isinstance(m, nn.Conv):
            kaiming_uniform_(m.weight, m.fan_in, rng, a)
            if m.bias is not None:
                fan_in_uniform_(m.bias, m.fan_in, rng)
        elif isinstance(m, nn.Linear):
            fan_in_uniform_(m.weight, m.fan_in, rng)
            if m.bias is not None:
                fan_in_uniform_(m.bias, m.fan_in, rng)


def init_kaiming_normal_convs(module: nn.Module, rng: np.random.Generator) -> None:
    """Kaiming-normal (fan-out) convs, unit/zero batch-norm, U(+-1/sqrt(k)) linear layers."""
    for m in module.modules():
        if isinstance(m, nn.Conv):
            kaiming_normal_fan_out_(m.weight, m.fan_out, rng)
            if m.bias is not None:
                m.bias.data[...] = 0
        elif isinstance(m, nn.BatchNorm):
            m.weight.data[...] = 1
            m.bias.data[...] = 0
        elif isinstance(m, nn.Linear):
            fan_in_uniform_(m.weight, m.fan_in, rng)
            if m.bias is not None:
                fan_in_uniform_(m.bias, m.fan_in, rng)
