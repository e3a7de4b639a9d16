"""3x3 stride-2 max pooling (padding 1)."""
import numpy as np

from ..errors import ShapeError
from . import backend


def maxpool3x3s2_fwd(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.ndim != 4 or x.shape[2] < 3 or x.shape[3] < 3:
        raise ShapeError(f"max pool needs spatial dims >= 3, got {x.shape}")
    return backend.kernels.maxpool_fwd(x, 3, 2, 1)


def maxpool3x3s2_bwd(grad_out: np.ndarray, argmax: np.ndarray, x_shape: tuple) -> np.ndarray:
    """Route each output gradient to the (first) maximal input of its window."""
    return backend.kernels.maxpool_bwd(grad_out, argmax, tuple(x_shape))
