"""Write S2I outputs as 8-bit binary PGM images."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import s2i
from .tensor import Tensor, no_grad

PathLike = Union[str, os.PathLike]


def to_uint8(img: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Map an image to 0..255.

    With ``normalize`` the minimum becomes 0 and the maximum 255; a constant
    image becomes all zeros. Without it values are rounded and clipped.
    """
    img = np.asarray(img, dtype=np.float64)
    if not normalize:
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros(img.shape, dtype=np.uint8)
    return np.rint((img - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def write_pgm(path: PathLike, img: np.ndarray) -> Path:
    """Binary (P5) graymap with maxval 255."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("PGM output needs a 2D uint8 array")
    h, w = img.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos].decode("ascii"))
    if fields[0] != "P5" or fields[3] != "255":
        raise ValueError(f"{path} is not an 8-bit binary PGM")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos + 1).reshape(h, w)


def s2i_image(signal: np.ndarray, kind: str, module: Optional[s2i.S2IModule] = None) -> np.ndarray:
    """The single-channel 178x178 image an S2I module produces for one signal."""
    kind = s2i.normalize_kind(kind)
    sig = np.asarray(signal, dtype=np.float64)
    if kind == "signal_as_image":
        return s2i.signal_as_image(sig)
    if kind == "spectrogram":
        return s2i.spectrogram_image(sig)
    if kind in s2i.TRAINABLE:
        if module is None:
            raise ValueError(f"rendering {kind} needs trained parameters")
        dtype = module.conv1.weight.dtype
        with no_grad():
            out = module(Tensor(sig.astype(dtype)[None, None]))
        return out.data[0, 0].astype(np.float64)
    raise ValueError("s2i=none produces no image")


def render_example(
    signal: np.ndarray, kind: str, out_dir: PathLike, stem: str, module: Optional[s2i.S2IModule] = None
) -> tuple[Path, Path]:
    """Write ``<stem>_<kind>.pgm`` and the raw signal as ``<stem>_signal.csv``."""
    kind = s2i.normalize_kind(kind)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    img = s2i_image(signal, kind, module)
    # rasterised images are already 0/255; everything else is stretched per image
    pixels = to_uint8(img, normalize=kind != "signal_as_image")
    pgm = write_pgm(out_dir / f"{stem}_{kind}.pgm", pixels)
    csv_path = out_dir / f"{stem}_signal.csv"
    csv_path.write_text("".join(f"{v!r}\n" for v in np.asarray(signal, dtype=np.float64).tolist()))
    return pgm, csv_path
