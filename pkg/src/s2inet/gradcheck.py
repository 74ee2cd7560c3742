"""Compare analytic gradients against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradcheckReport:
    """Per-input outcome of a gradient check.

    ``max_rel_error[i]`` is ``max|analytic - numeric| / max(max|analytic|, max|numeric|)``
    taken over the checkable elements of input ``i``. Elements where the
    one-sided difference quotients disagree (a kink, e.g. a max-pool tie) are
    counted in ``excluded`` and left out.
    """

    max_rel_error: list[float]
    excluded: list[int] = field(default_factory=list)
    checked: list[int] = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error, default=0.0)

    def passed(self, tol: float) -> bool:
        return self.worst <= tol


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    scale = max(np.abs(a).max(), np.abs(b).max())
    if scale == 0.0:
        return 0.0
    return float(np.abs(a - b).max() / scale)


def gradcheck(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    seed: int = 0,
    kink_tol: float = 1e-3,
    points: Optional[int] = None,
) -> GradcheckReport:
    """Check ``f``'s gradients with respect to every input with ``requires_grad``.

    Non-scalar outputs are reduced with a fixed random projection so every
    output element contributes. Inputs must be 64-bit. With ``points`` only
    that many randomly chosen elements of each input are perturbed, which
    keeps checks of large models affordable.
    """
    for t in inputs:
        if t.requires_grad and t.dtype != np.float64:
            raise TypeError("gradcheck needs float64 inputs")
    out = f(*inputs)
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal(out.shape)

    def scalar() -> float:
        return float(np.sum(f(*inputs).data * proj))

    for t in inputs:
        t.grad = None
    out.backward(proj.astype(out.dtype))

    f0 = scalar()
    errors, excluded, checked = [], [], []
    for t in inputs:
        if not t.requires_grad:
            errors.append(0.0)
            excluded.append(0)
            checked.append(0)
            continue
        analytic = (np.zeros_like(t.data) if t.grad is None else t.grad).reshape(-1)
        t.data = np.ascontiguousarray(t.data)
        flat = t.data.reshape(-1)  # a view, so perturbations reach the input
        if points is None or points >= flat.size:
            idx = np.arange(flat.size)
        else:
            idx = np.sort(rng.choice(flat.size, size=points, replace=False))
        numeric = np.zeros(len(idx))
        ok = np.ones(len(idx), dtype=bool)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            fp = scalar()
            flat[i] = orig - h
            fm = scalar()
            flat[i] = orig
            numeric[j] = (fp - fm) / (2 * h)
            right, left = (fp - f0) / h, (f0 - fm) / h
            if abs(right - left) > kink_tol * max(1.0, abs(right), abs(left)):
                ok[j] = False
        errors.append(_relative(analytic[idx][ok], numeric[ok]))
        excluded.append(int((~ok).sum()))
        checked.append(int(ok.sum()))
    return GradcheckReport(errors, excluded, checked)
