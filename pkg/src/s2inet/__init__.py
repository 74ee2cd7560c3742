"""Signal-to-image front ends and 1D/2D base models for EEG classification, on a small numpy autodiff engine."""

from .tensor import NonFiniteError, Tensor, no_grad, tensor

__version__ = "0.1.0"

__all__ = ["NonFiniteError", "Tensor", "no_grad", "tensor", "__version__"]
