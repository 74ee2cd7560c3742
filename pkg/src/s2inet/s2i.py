"""Signal-to-image front ends.

Each module maps a batch of raw signals ``[N, 1, 178]`` to a batch of
three-channel images ``[N, 3, 178, 178]``. ``signal_as_image`` and
``spectrogram`` are fixed transforms; ``cnn1`` and ``cnn2`` are small 1D
convolutional stacks whose feature maps become image rows and are trained
together with the downstream network. ``none`` passes signals through
unchanged for 1D networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import functional as F
from . import init, nn
from .tensor import DEFAULT_DTYPE, Tensor

SIGNAL_LENGTH = 178
IMAGE_SIZE = 178
PIXEL_ON = 255.0

S2I_KINDS = ("none", "signal_as_image", "spectrogram", "cnn1", "cnn2")
TRAINABLE = {"cnn1", "cnn2"}


def normalize_kind(kind: str) -> str:
    """Accept ``signal-as-image`` and ``signal_as_image`` alike."""
    k = kind.strip().lower().replace("-", "_")
    if k not in S2I_KINDS:
        raise ValueError(f"unknown S2I kind {kind!r}; expected one of {', '.join(S2I_KINDS)}")
    return k


def check_pairing(kind: str, dim: int) -> None:
    """1D base models take raw signals; 2D ones need an image-producing module."""
    kind = normalize_kind(kind)
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if (kind == "none") != (dim == 1):
        if dim == 1:
            raise ValueError(f"s2i={kind} produces images and cannot feed a 1D model")
        raise ValueError("a 2D model needs an S2I module; s2i=none is only valid with dim=1")


def _as_batch(signals: np.ndarray) -> np.ndarray:
    x = np.asarray(signals, dtype=np.float64)
    if x.ndim == 3 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim == 1:
        x = x[None]
    if x.ndim != 2:
        raise ValueError(f"expected signals of shape [N, L] or [N, 1, L], got {np.shape(signals)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    return x


# -- signal as image ---------------------------------------------------------


def signal_rows(signals: np.ndarray, size: int = IMAGE_SIZE) -> np.ndarray:
    """Row index of the lit pixel for every sample.

    Amplitudes are mapped affinely so the minimum lands on 1 and the maximum on
    ``size``, rounded half away from zero, and flipped so larger amplitudes sit
    nearer the top row. A constant signal maps to the middle row.
    """
    x = _as_batch(signals)
    lo = x.min(axis=1, keepdims=True)
    span = x.max(axis=1, keepdims=True) - lo
    flat = span[:, 0] == 0
    span[flat] = 1.0
    v = 1.0 + (size - 1) * (x - lo) / span
    level = np.floor(v + 0.5).astype(np.int64)  # v >= 1, so this is half-away-from-zero
    rows = size - level
    rows[flat] = size // 2
    return rows


def signal_as_image(signals: np.ndarray) -> np.ndarray:
    """Rasterise each signal into a 178x178 image with one 255-valued pixel per column.

    Accepts one signal of length 178 (returns ``[178, 178]``) or a batch
    (returns ``[N, 178, 178]``).
    """
    single = np.ndim(signals) == 1
    rows = signal_rows(signals)
    n, length = rows.shape
    img = np.zeros((n, IMAGE_SIZE, length), dtype=np.float64)
    img[np.arange(n)[:, None], rows, np.arange(length)[None, :]] = PIXEL_ON
    return img[0] if single else img


# -- spectrogram ---------------------------------------------------------------


@dataclass(frozen=True)
class SpectrogramSpec:
    alpha: float = 0.25
    segment: int = 8
    overlap: int = 4
    nfft: int = 64
    fs: float = 178.0

    def __post_init__(self) -> None:
        if not 0 <= self.overlap < self.segment <= self.nfft:
            raise ValueError("need 0 <= overlap < segment <= nfft")
        if self.fs <= 0:
            raise ValueError("sampling rate must be positive")

    @property
    def hop(self) -> int:
        return self.segment - self.overlap

    @property
    def bins(self) -> int:
        return self.nfft // 2 + 1

    def segments(self, length: int) -> int:
        if length < self.segment:
            raise ValueError(f"signal of length {length} is shorter than one {self.segment}-sample segment")
        return (length - self.segment) // self.hop + 1


def tukey_window(length: int, alpha: float = 0.25) -> np.ndarray:
    """Symmetric Tukey (tapered cosine) window.

    ``alpha`` is the fraction of the window inside the cosine tapers:
    0 gives a rectangular window, 1 a Hann window.
    """
    if length < 1:
        raise ValueError("window length must be positive")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if length == 1 or alpha == 0.0:
        return np.ones(length)
    n = np.arange(length, dtype=np.float64)
    m = length - 1
    w = np.ones(length)
    width = int(math.floor(alpha * m / 2.0))
    head = n[: width + 1]
    w[: width + 1] = 0.5 * (1 + np.cos(np.pi * (-1 + 2.0 * head / (alpha * m))))
    tail = n[length - width - 1 :]
    w[length - width - 1 :] = 0.5 * (1 + np.cos(np.pi * (-2.0 / alpha + 1 + 2.0 * tail / (alpha * m))))
    return w


def spectrogram_psd(signals: np.ndarray, spec: SpectrogramSpec = SpectrogramSpec()) -> np.ndarray:
    """One-sided power spectral density per segment, ``[bins, segments]`` (``[33, 43]`` by default).

    Each segment is mean-detrended, windowed, zero-padded to ``nfft`` and
    transformed; ``|X|^2 / (fs * sum(w^2))`` is doubled for every bin except DC
    and Nyquist.
    """
    single = np.ndim(signals) == 1
    x = _as_batch(signals)
    n_seg = spec.segments(x.shape[1])
    w = tukey_window(spec.segment, spec.alpha)
    seg = sliding_window_view(x, spec.segment, axis=1)[:, :: spec.hop][:, :n_seg]
    seg = (seg - seg.mean(axis=2, keepdims=True)) * w
    spectrum = np.fft.rfft(seg, n=spec.nfft, axis=2)
    psd = (spectrum.real**2 + spectrum.imag**2) / (spec.fs * np.sum(w * w))
    last = -1 if spec.nfft % 2 == 0 else None
    psd[:, :, 1:last] *= 2.0
    psd = np.ascontiguousarray(psd.transpose(0, 2, 1))
    return psd[0] if single else psd


def spectrogram_image(signals: np.ndarray, spec: SpectrogramSpec = SpectrogramSpec()) -> np.ndarray:
    """Spectrogram resized to 178x178 with bilinear interpolation; raw PSD values."""
    single = np.ndim(signals) == 1
    psd = spectrogram_psd(signals if not single else np.asarray(signals)[None], spec)
    img = F.bilinear_resize(Tensor(psd), IMAGE_SIZE, IMAGE_SIZE).data
    return img[0] if single else img


# -- learnable modules -------------------------------------------------------


def stack_channels(img: Tensor) -> Tensor:
    """Three identical copies of a ``[H, W]`` or ``[N, 1, H, W]`` image along the channel axis."""
    if img.ndim == 2:
        return F.repeat(img.reshape(1, *img.shape), axis=0, count=3)
    if img.ndim == 3:
        img = img.reshape(img.shape[0], 1, *img.shape[1:])
    return F.repeat(img, axis=1, count=3)


class S2IModule(nn.Module):
    kind = "none"
    trainable = False

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class Identity(S2IModule):
    kind = "none"

    def forward(self, x: Tensor) -> Tensor:
        return x


class SignalAsImage(S2IModule):
    kind = "signal_as_image"

    def forward(self, x: Tensor) -> Tensor:
        img = signal_as_image(x.data).astype(x.dtype)
        return stack_channels(Tensor(img[:, None]))


class Spectrogram(S2IModule):
    kind = "spectrogram"

    def __init__(self, spec: SpectrogramSpec = SpectrogramSpec()) -> None:
        self.spec = spec

    def forward(self, x: Tensor) -> Tensor:
        img = spectrogram_image(x.data.reshape(x.shape[0], -1), self.spec).astype(x.dtype)
        return stack_channels(Tensor(img[:, None]))


class CNNS2I(S2IModule):
    """One or two 1D conv layers (kernel 3, padding 1) whose channels become image rows.

    ``layers=1``: conv 1->8, giving an 8x178 map.
    ``layers=2``: conv 1->8, ReLU, max pool 2, conv 8->16, giving 16x89.
    The map is resized to 178x178 and stacked to three channels.
    """

    trainable = True

    def __init__(self, layers: int = 1, dtype: Any = DEFAULT_DTYPE) -> None:
        if layers not in (1, 2):
            raise ValueError("CNN S2I supports one or two layers")
        self.layers = layers
        self.kind = f"cnn{layers}"
        self.conv1 = nn.Conv(1, 1, 8, 3, padding=1, dtype=dtype)
        if layers == 2:
            self.relu = nn.ReLU()
            self.pool = nn.MaxPool(1, 2, 2)
            self.conv2 = nn.Conv(1, 8, 16, 3, padding=1, dtype=dtype)

    def feature_map(self, x: Tensor) -> Tensor:
        """Pre-resize map: ``[N, 8, 178]`` or ``[N, 16, 89]``."""
        out = self.conv1(x)
        if self.layers == 2:
            out = self.conv2(self.pool(self.relu(out)))
        return out

    def forward(self, x: Tensor) -> Tensor:
        fmap = self.feature_map(x)
        n, rows, cols = fmap.shape
        # channels become image rows, channel 0 on top
        img = F.bilinear_resize(fmap.reshape(n, 1, rows, cols), IMAGE_SIZE, IMAGE_SIZE)
        return stack_channels(img)


def build_s2i(kind: str, rng: Optional[np.random.Generator] = None, dtype: Any = DEFAULT_DTYPE) -> S2IModule:
    """Create an S2I module; trainable ones get Kaiming-uniform (a=0) convolutions."""
    kind = normalize_kind(kind)
    if kind == "none":
        return Identity()
    if kind == "signal_as_image":
        return SignalAsImage()
    if kind == "spectrogram":
        return Spectrogram()
    module = CNNS2I(1 if kind == "cnn1" else 2, dtype=dtype)
    init.init_kaiming_uniform_convs(module, np.random.default_rng(0) if rng is None else rng, a=0.0)
    return module


def s2i_cnn_forward(signal: Tensor, layers: int, params: dict[str, Tensor]) -> Tensor:
    """Functional form of the CNN module for a single ``[178]`` signal.

    ``params`` holds ``conv1.weight``/``conv1.bias`` (and ``conv2.*`` for two
    layers). Returns the ``[178, 178]`` image before channel stacking.
    """
    x = signal.reshape(1, 1, -1)
    out = F.conv_forward(x, params["conv1.weight"], params["conv1.bias"], padding=1, dim=1)
    if layers == 2:
        out = F.maxpool_forward(F.relu_forward(out), 2, 2, dim=1)
        out = F.conv_forward(out, params["conv2.weight"], params["conv2.bias"], padding=1, dim=1)
    elif layers != 1:
        raise ValueError("layers must be 1 or 2")
    _, rows, cols = out.shape
    return F.bilinear_resize(out.reshape(rows, cols), IMAGE_SIZE, IMAGE_SIZE)


class CombinedModel(nn.Module):
    """An S2I front end followed by a base model."""

    def __init__(self, s2i: S2IModule, base: nn.Module) -> None:
        self.s2i = s2i
        self.base = base

    def forward(self, x: Tensor) -> Tensor:
        return self.base(self.s2i(x))
