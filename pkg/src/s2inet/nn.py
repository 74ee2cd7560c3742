"""Module containers and the layers the model zoo is assembled from.

Layers take ``dim`` (1 or 2) so a 1D network and its 2D twin share the same
class sequence, attribute names and channel widths.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Any, Iterator, Optional, Union

import numpy as np

from . import functional as F
from .tensor import DEFAULT_DTYPE, Tensor


class Parameter(Tensor):
    """A trainable tensor registered on a module."""

    def __init__(self, data: Any, dtype: Any = None) -> None:
        super().__init__(data, requires_grad=True, dtype=dtype)


class Buffer(Tensor):
    """Non-trainable state that is saved in checkpoints (e.g. running statistics)."""


class Module:
    training: bool = True

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self.children():
            yield from child.modules()

    def _named(self, kind: type, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, kind):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value._named(kind, prefix + name + ".")

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        return self._named(Parameter)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[tuple[str, Buffer]]:
        return self._named(Buffer)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state: OrderedDict[str, np.ndarray] = OrderedDict()
        for name, p in self.named_parameters():
            state[name] = p.data
        for name, b in self.named_buffers():
            state[name] = b.data
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        own.update(self.named_buffers())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, t in own.items():
            arr = np.asarray(state[name])
            if arr.shape != t.shape:
                raise ValueError(f"{name}: expected shape {t.shape}, got {arr.shape}")
            t.data = arr.astype(t.dtype, copy=True)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def to(self, dtype: Any) -> "Module":
        for _, t in list(self.named_parameters()) + list(self.named_buffers()):
            t.data = t.data.astype(dtype)
        return self

    def extra_repr(self) -> str:
        return ""

    def __repr__(self) -> str:
        lines = [f"{type(self).__name__}({self.extra_repr()}"]
        kids = list(self.children())
        if not kids:
            return lines[0] + ")"
        for name, child in kids:
            body = repr(child).replace("\n", "\n  ")
            lines.append(f"  ({name}): {body}")
        return "\n".join(lines) + "\n)"


class Sequential(Module):
    def __init__(self, *layers: Union[Module, tuple[str, Module]]) -> None:
        for i, layer in enumerate(layers):
            name, module = layer if isinstance(layer, tuple) else (str(i), layer)
            setattr(self, name, module)

    def add(self, name: str, module: Module) -> None:
        setattr(self, name, module)

    def __iter__(self) -> Iterator[Module]:
        return (m for _, m in self.children())

    def __len__(self) -> int:
        return sum(1 for _ in self.children())

    def forward(self, x: Tensor) -> Tensor:
        for layer in self:
            x = layer(x)
        return x


def _empty(shape: tuple[int, ...], dtype: Any) -> np.ndarray:
    return np.zeros(shape, dtype=dtype)


class Conv(Module):
    def __init__(
        self,
        dim: int,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
        dtype: Any = DEFAULT_DTYPE,
    ) -> None:
        self.dim = dim
        self.spec = F.ConvSpec(in_channels, out_channels, kernel_size, stride, padding)
        self.weight = Parameter(_empty((out_channels, in_channels) + (kernel_size,) * dim, dtype))
        self.bias = Parameter(_empty((out_channels,), dtype)) if bias else None

    @property
    def fan_in(self) -> int:
        return self.spec.in_channels * self.spec.kernel_size**self.dim

    @property
    def fan_out(self) -> int:
        return self.spec.out_channels * self.spec.kernel_size**self.dim

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_forward(x, self.weight, self.bias, self.spec.stride, self.spec.padding, self.dim)

    def extra_repr(self) -> str:
        s = self.spec
        return f"{self.dim}d, {s.in_channels}->{s.out_channels}, k={s.kernel_size}, s={s.stride}, p={s.padding}"


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, bias: bool = True, dtype: Any = DEFAULT_DTYPE) -> None:
        self.weight = Parameter(_empty((out_features, in_features), dtype))
        self.bias = Parameter(_empty((out_features,), dtype)) if bias else None

    @property
    def fan_in(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: Tensor) -> Tensor:
        return F.linear_forward(x, self.weight, self.bias)

    def extra_repr(self) -> str:
        return f"{self.weight.shape[1]}->{self.weight.shape[0]}"


class BatchNorm(Module):
    def __init__(
        self, dim: int, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype: Any = DEFAULT_DTYPE
    ) -> None:
        if channels < 1:
            raise ValueError("batchnorm needs at least one channel")
        self.dim = dim
        self.momentum, self.eps = momentum, eps
        self.weight = Parameter(np.ones(channels, dtype=dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = Buffer(np.zeros(channels, dtype=dtype))
        self.running_var = Buffer(np.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != self.dim + 2:
            raise ValueError(f"batchnorm{self.dim}d got input of shape {x.shape}")
        return F.batchnorm_forward(
            x,
            self.weight,
            self.bias,
            self.running_mean.data,
            self.running_var.data,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )

    def extra_repr(self) -> str:
        return f"{self.dim}d, {self.weight.shape[0]}"


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.relu_forward(x)


class MaxPool(Module):
    def __init__(self, dim: int, kernel_size: int, stride: Optional[int] = None, padding: int = 0) -> None:
        self.dim, self.kernel_size, self.stride, self.padding = dim, kernel_size, stride or kernel_size, padding

    def forward(self, x: Tensor) -> Tensor:
        return F.maxpool_forward(x, self.kernel_size, self.stride, self.padding, self.dim)

    def extra_repr(self) -> str:
        return f"{self.dim}d, k={self.kernel_size}, s={self.stride}, p={self.padding}"


class AvgPool(Module):
    def __init__(self, dim: int, kernel_size: int, stride: Optional[int] = None) -> None:
        self.dim, self.kernel_size, self.stride = dim, kernel_size, stride or kernel_size

    def forward(self, x: Tensor) -> Tensor:
        return F.avgpool_forward(x, self.kernel_size, self.stride, self.dim)


class AdaptiveAvgPool(Module):
    def __init__(self, dim: int, output_size: int) -> None:
        self.dim, self.output_size = dim, output_size

    def forward(self, x: Tensor) -> Tensor:
        return F.adaptive_avgpool_forward(x, self.output_size, self.dim)

    def extra_repr(self) -> str:
        return f"{self.dim}d, {self.output_size}"


class Dropout(Module):
    """Inverted dropout. The generator is shared with the training run via :func:`attach_rng`."""

    def __init__(self, p: float = 0.5) -> None:
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self.rng = np.random.default_rng(0)

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout_forward(x, self.p, self.training, self.rng)

    def extra_repr(self) -> str:
        return f"p={self.p}"


class Flatten(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x.flatten(1)


def attach_rng(model: Module, rng: np.random.Generator) -> None:
    """Point every dropout layer in ``model`` at ``rng``."""
    for m in model.modules():
        if isinstance(m, Dropout):
            m.rng = rng


def count_parameters(model: Module) -> int:
    return sum(p.size for p in model.parameters())
