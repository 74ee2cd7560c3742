"""Layer kernels for 1D and 2D networks.

Every kernel works on channel-first batches ``[N, C, *spatial]`` with one or
two spatial axes. Forward passes are vectorised numpy; sums over a window or a
kernel run in a fixed order so results are reproducible bit for bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .tensor import Function, Tensor, is_grad_enabled


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        for name in ("in_channels", "out_channels", "kernel_size", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.padding < 0:
            raise ValueError("padding must be non-negative")

    def output_length(self, length: int) -> int:
        return conv_output_length(length, self.kernel_size, self.stride, self.padding)


def conv_output_length(length: int, kernel: int, stride: int, padding: int = 0) -> int:
    out = (length + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ValueError(
            f"window of {kernel} (stride {stride}, padding {padding}) does not fit an extent of {length}"
        )
    return out


def _check_spatial(x: np.ndarray, dim: int, what: str) -> None:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if x.ndim != dim + 2:
        raise ValueError(f"{what} expects [N, C, {'L' if dim == 1 else 'H, W'}] input, got shape {x.shape}")


def _pad(x: np.ndarray, dim: int, padding: int, value: float = 0.0) -> np.ndarray:
    if padding == 0:
        return x
    widths = [(0, 0), (0, 0)] + [(padding, padding)] * dim
    return np.pad(x, widths, constant_values=value)


def _offset_slices(offset: Sequence[int], n_out: Sequence[int], stride: int) -> tuple[slice, ...]:
    return (slice(None), slice(None)) + tuple(
        slice(o, o + stride * (n - 1) + 1, stride) for o, n in zip(offset, n_out)
    )


def _gather(
    xp: np.ndarray, dim: int, kernel: int, stride: int, n_out: Sequence[int], channel_major: bool = False
) -> np.ndarray:
    """im2col as ``[K^dim, C, N, *out]`` (or ``[C, K^dim, N, *out]``), one copy per kernel offset."""
    n, c = xp.shape[:2]
    kk = kernel**dim
    shape = ((c, kk) if channel_major else (kk, c)) + (n,) + tuple(n_out)
    cols = np.empty(shape, dtype=xp.dtype)
    for k, offset in enumerate(itertools.product(range(kernel), repeat=dim)):
        src = xp[_offset_slices(offset, n_out, stride)].swapaxes(0, 1)
        if channel_major:
            cols[:, k] = src
        else:
            cols[k] = src
    return cols


def _scatter(
    gcols: np.ndarray, padded_shape: tuple[int, ...], dim: int, kernel: int, stride: int
) -> np.ndarray:
    """Adjoint of :func:`_gather`: add ``[K^dim, C, N, *out]`` back onto the padded input."""
    out = np.zeros(padded_shape, dtype=gcols.dtype)
    n_out = gcols.shape[3:]
    for k, offset in enumerate(itertools.product(range(kernel), repeat=dim)):
        out[_offset_slices(offset, n_out, stride)] += gcols[k].swapaxes(0, 1)
    return out


def _unpad(x: np.ndarray, dim: int, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return x[(slice(None), slice(None)) + (slice(padding, -padding),) * dim]


# -- convolution -------------------------------------------------------------


class Conv(Function):
    def forward(self, x, weight, bias, stride=1, padding=0, dim=2):
        _check_spatial(x, dim, "conv")
        if weight.ndim != dim + 2:
            raise ValueError(f"conv weight must have {dim + 2} axes, got shape {weight.shape}")
        out_ch, in_ch = weight.shape[:2]
        kernel = weight.shape[2]
        if any(k != kernel for k in weight.shape[2:]):
            raise ValueError("only square kernels are supported")
        if x.shape[1] != in_ch:
            raise ValueError(f"conv expects {in_ch} input channels, got {x.shape[1]}")
        if bias is not None and bias.shape != (out_ch,):
            raise ValueError(f"conv bias must have shape ({out_ch},), got {bias.shape}")
        n_out = tuple(conv_output_length(n, kernel, stride, padding) for n in x.shape[2:])

        xp = _pad(x, dim, padding)
        n = x.shape[0]
        direct = kernel == 1 and stride == 1 and padding == 0
        if direct:
            cols = x.swapaxes(0, 1).reshape(in_ch, -1)  # 1x1 conv needs no gather
        else:
            cols = _gather(xp, dim, kernel, stride, n_out, channel_major=True).reshape(in_ch * kernel**dim, -1)
        # weight columns are ordered (C, *K); cols rows must match
        w2 = weight.reshape(out_ch, in_ch, kernel**dim).reshape(out_ch, -1)
        out = w2 @ cols  # (out_ch, N*O)
        if bias is not None:
            out += bias[:, None]
        self.cols = cols if is_grad_enabled() else None
        self.meta = (x.shape, xp.shape, weight, stride, padding, dim, kernel, n_out, direct)
        return np.ascontiguousarray(out.reshape((out_ch, n) + n_out).swapaxes(0, 1))

    def backward(self, grad):
        x_shape, xp_shape, weight, stride, padding, dim, kernel, n_out, direct = self.meta
        out_ch, in_ch = weight.shape[:2]
        n = x_shape[0]
        g2 = np.ascontiguousarray(grad.swapaxes(0, 1)).reshape(out_ch, -1)  # (out_ch, N*O)
        gw = (g2 @ self.cols.T).reshape(weight.shape)
        gb = g2.sum(axis=1) if self.inputs[2] is not None else None
        gx = None
        if self.inputs[0].requires_grad:
            gcols = weight.reshape(out_ch, -1).T @ g2  # (C*K, N*O)
            if direct:
                gx = np.ascontiguousarray(gcols.reshape((in_ch, n) + tuple(n_out)).swapaxes(0, 1))
            else:
                gcols = gcols.reshape((in_ch, kernel**dim, n) + tuple(n_out)).swapaxes(0, 1)
                gx = _unpad(_scatter(gcols, xp_shape, dim, kernel, stride), dim, padding)
        return gx, gw, gb


def conv_forward(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0, dim: int = 2
) -> Tensor:
    """Cross-correlation with zero padding (no kernel flip)."""
    return Conv.apply(x, weight, bias, stride=stride, padding=padding, dim=dim)


# -- pooling -----------------------------------------------------------------


class MaxPool(Function):
    def forward(self, x, kernel, stride, padding=0, dim=2):
        _check_spatial(x, dim, "maxpool")
        if padding > kernel // 2:
            raise ValueError("maxpool padding may be at most half the kernel")
        n_out = tuple(conv_output_length(n, kernel, stride, padding) for n in x.shape[2:])
        xp = _pad(x, dim, padding, value=-np.inf)
        cols = _gather(xp, dim, kernel, stride, n_out)  # K, C, N, *O
        # argmax returns the first maximum: ties go to the lowest window index
        self.argmax = cols.argmax(axis=0)
        self.meta = (xp.shape, kernel, stride, padding, dim)
        out = np.take_along_axis(cols, self.argmax[None], axis=0)[0]
        return np.ascontiguousarray(out.swapaxes(0, 1))

    def backward(self, grad):
        xp_shape, kernel, stride, padding, dim = self.meta
        g = grad.swapaxes(0, 1)
        gcols = np.zeros((kernel**dim,) + g.shape, dtype=grad.dtype)
        np.put_along_axis(gcols, self.argmax[None], g[None], axis=0)
        return (_unpad(_scatter(gcols, xp_shape, dim, kernel, stride), dim, padding),)


def maxpool_forward(x: Tensor, kernel: int, stride: Optional[int] = None, padding: int = 0, dim: int = 2) -> Tensor:
    return MaxPool.apply(x, kernel=kernel, stride=stride or kernel, padding=padding, dim=dim)


class AvgPool(Function):
    def forward(self, x, kernel, stride, dim=2):
        _check_spatial(x, dim, "avgpool")
        n_out = tuple(conv_output_length(n, kernel, stride) for n in x.shape[2:])
        cols = _gather(x, dim, kernel, stride, n_out)
        self.meta = (x.shape, kernel, stride, dim)
        return np.ascontiguousarray(cols.mean(axis=0).swapaxes(0, 1))

    def backward(self, grad):
        x_shape, kernel, stride, dim = self.meta
        share = (grad / kernel**dim).swapaxes(0, 1)
        gcols = np.broadcast_to(share[None], (kernel**dim,) + share.shape)
        return (_scatter(gcols, x_shape, dim, kernel, stride),)


def avgpool_forward(x: Tensor, kernel: int, stride: Optional[int] = None, dim: int = 2) -> Tensor:
    return AvgPool.apply(x, kernel=kernel, stride=stride or kernel, dim=dim)


def adaptive_pool_matrix(length: int, target: int, dtype=np.float64) -> np.ndarray:
    """Row i averages the input window ``[floor(i*L/T), ceil((i+1)*L/T))``."""
    if target < 1 or length < 1:
        raise ValueError("adaptive pooling needs positive input and target extents")
    mat = np.zeros((target, length), dtype=dtype)
    for i in range(target):
        lo = (i * length) // target
        hi = -((-(i + 1) * length) // target)
        mat[i, lo:hi] = 1.0 / (hi - lo)
    return mat


def _apply_along(x: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract spatial axis ``2 + j`` of ``x`` with ``mats[j]`` (shape out x in)."""
    for j, mat in enumerate(mats):
        axis = 2 + j
        x = np.moveaxis(np.tensordot(x, mat, axes=([axis], [1])), -1, axis)
    return x


class AdaptiveAvgPool(Function):
    def forward(self, x, output_size, dim=2):
        _check_spatial(x, dim, "adaptive_avgpool")
        if isinstance(output_size, int):
            output_size = (output_size,) * dim
        self.mats = [adaptive_pool_matrix(n, t, x.dtype) for n, t in zip(x.shape[2:], output_size)]
        return np.ascontiguousarray(_apply_along(x, self.mats))

    def backward(self, grad):
        return (np.ascontiguousarray(_apply_along(grad, [m.T for m in self.mats])),)


def adaptive_avgpool_forward(x: Tensor, output_size, dim: int = 2) -> Tensor:
    return AdaptiveAvgPool.apply(x, output_size=output_size, dim=dim)


# -- normalisation -----------------------------------------------------------


class BatchNorm(Function):
    def forward(self, x, gamma, beta, running_mean, running_var, training=True, momentum=0.1, eps=1e-5):
        if x.ndim < 2 or x.shape[1] == 0:
            raise ValueError("batchnorm needs at least one channel")
        c = x.shape[1]
        if gamma.shape != (c,) or beta.shape != (c,):
            raise ValueError(f"batchnorm parameters must have shape ({c},)")
        axes = (0,) + tuple(range(2, x.ndim))
        bshape = (1, c) + (1,) * (x.ndim - 2)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            n = x.size // c
            running_mean *= 1 - momentum
            running_mean += momentum * mean
            running_var *= 1 - momentum
            running_var += momentum * var * (n / max(n - 1, 1))
        else:
            mean, var = running_mean, running_var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
        self.saved = (xhat, inv_std, gamma, axes, bshape, training)
        return (xhat * gamma.reshape(bshape) + beta.reshape(bshape)).astype(x.dtype, copy=False)

    def backward(self, grad):
        xhat, inv_std, gamma, axes, bshape, training = self.saved
        ggamma = (grad * xhat).sum(axis=axes)
        gbeta = grad.sum(axis=axes)
        gxhat = grad * gamma.reshape(bshape)
        if training:
            gx = (
                gxhat
                - gxhat.mean(axis=axes).reshape(bshape)
                - xhat * (gxhat * xhat).mean(axis=axes).reshape(bshape)
            ) * inv_std.reshape(bshape)
        else:
            gx = gxhat * inv_std.reshape(bshape)
        return gx, ggamma, gbeta, None, None


def batchnorm_forward(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool = True,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Batch normalisation. ``running_mean``/``running_var`` are updated in place in training mode."""
    return BatchNorm.apply(
        x, gamma, beta, Tensor(running_mean), Tensor(running_var), training=training, momentum=momentum, eps=eps
    )


# -- dense layers and activations -------------------------------------------


class Linear(Function):
    def forward(self, x, weight, bias):
        if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
            raise ValueError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
        if bias is not None and bias.shape != (weight.shape[0],):
            raise ValueError(f"linear: bias shape {bias.shape} does not match {weight.shape[0]} outputs")
        self.x, self.weight = x, weight
        out = x @ weight.T
        if bias is not None:
            out += bias
        return out

    def backward(self, grad):
        gb = grad.sum(axis=0) if self.inputs[2] is not None else None
        return grad @ self.weight, grad.T @ self.x, gb


def linear_forward(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    return Linear.apply(x, weight, bias)


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.mask,)


def relu_forward(x: Tensor) -> Tensor:
    return ReLU.apply(x)


class Dropout(Function):
    def forward(self, x, p, training, rng):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        if not training or p == 0.0:
            self.scale = None
            return x.copy()
        keep = rng.random(x.shape) >= p
        self.scale = keep.astype(x.dtype) / x.dtype.type(1.0 - p)
        return x * self.scale

    def backward(self, grad):
        return (grad if self.scale is None else grad * self.scale,)


def dropout_forward(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    return Dropout.apply(x, p=p, training=training, rng=rng)


class Concat(Function):
    def forward(self, *arrays, axis=0):
        if not arrays:
            raise ValueError("concat needs at least one tensor")
        self.sizes = [a.shape[axis] for a in arrays]
        self.axis = axis
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


class Repeat(Function):
    """Tile a size-1 axis ``count`` times; the adjoint sums the copies."""

    def forward(self, x, axis, count):
        if x.shape[axis] != 1:
            raise ValueError("repeat expects a size-1 axis")
        self.axis = axis
        return np.repeat(x, count, axis=axis)

    def backward(self, grad):
        return (grad.sum(axis=self.axis, keepdims=True),)


def repeat(x: Tensor, axis: int, count: int) -> Tensor:
    return Repeat.apply(x, axis=axis, count=count)


# -- resampling --------------------------------------------------------------


def bilinear_matrix(n_in: int, n_out: int, dtype=np.float64) -> np.ndarray:
    """1D linear interpolation weights with half-pixel centres and edge clamping."""
    if n_in < 1 or n_out < 1:
        raise ValueError("resize extents must be positive")
    mat = np.zeros((n_out, n_in), dtype=dtype)
    scale = n_in / n_out
    for i in range(n_out):
        src = min(max((i + 0.5) * scale - 0.5, 0.0), n_in - 1)
        lo = int(math.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        mat[i, lo] += 1.0 - frac
        mat[i, hi] += frac
    return mat


class BilinearResize(Function):
    def forward(self, x, out_h, out_w):
        if out_h < 1 or out_w < 1:
            raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
        if x.ndim < 2:
            raise ValueError("bilinear_resize needs at least two axes")
        self.rows = bilinear_matrix(x.shape[-2], out_h, x.dtype)
        self.cols = bilinear_matrix(x.shape[-1], out_w, x.dtype)
        return self.rows @ (x @ self.cols.T)

    def backward(self, grad):
        return (self.rows.T @ grad @ self.cols,)


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Resize the last two axes of ``x`` to ``out_h x out_w``."""
    return BilinearResize.apply(x, out_h=out_h, out_w=out_w)


# -- loss --------------------------------------------------------------------


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class CrossEntropy(Function):
    def forward(self, logits, labels):
        labels = np.asarray(labels)
        n, k = logits.shape
        if labels.shape != (n,):
            raise ValueError(f"expected {n} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise ValueError(f"labels must lie in [0, {k})")
        logp = log_softmax(logits)
        self.probs = np.exp(logp)
        self.labels = labels.astype(np.intp)
        return np.asarray(-logp[np.arange(n), self.labels].mean(), dtype=logits.dtype)

    def backward(self, grad):
        n = self.probs.shape[0]
        g = self.probs.copy()
        g[np.arange(n), self.labels] -= 1.0
        return g * (grad / n), None


def cross_entropy_loss(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    return CrossEntropy.apply(logits, Tensor(np.asarray(labels), dtype=np.int64))
