"""Batch normalization over (N, H, W) per channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ModeError, ShapeError


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5
    training: bool = True

    @classmethod
    def create(cls, channels: int, dtype=np.float32) -> "BatchNormState":
        return cls(
            gamma=np.ones(channels, dtype),
            beta=np.zeros(channels, dtype),
            running_mean=np.zeros(channels, dtype),
            running_var=np.ones(channels, dtype),
        )

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def _batch_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    count = x.shape[0] * x.shape[2] * x.shape[3]
    mean = x.mean(axis=(0, 2, 3))
    var = ((x - mean.reshape(1, -1, 1, 1)) ** 2).mean(axis=(0, 2, 3))
    return mean, var, count


def _bc(v: np.ndarray) -> np.ndarray:
    return v.reshape(1, -1, 1, 1)


def batchnorm_fwd(x: np.ndarray, state: BatchNormState) -> np.ndarray:
    """Normalize ``x``; in training mode also advances the running statistics.

    Running variance tracks the unbiased batch variance.
    """
    if x.ndim != 4 or x.shape[1] != state.channels:
        raise ShapeError(f"batchnorm over {state.channels} channels got input {x.shape}")
    if state.training:
        mean, var, count = _batch_stats(x)
        if count == 1:
            raise ShapeError("batchnorm in training mode needs more than one value per channel")
        m = state.momentum
        state.running_mean = ((1 - m) * state.running_mean + m * mean).astype(state.running_mean.dtype)
        unbiased = var * (count / (count - 1))
        state.running_var = ((1 - m) * state.running_var + m * unbiased).astype(state.running_var.dtype)
    else:
        mean, var = state.running_mean, state.running_var
    inv = 1.0 / np.sqrt(var + state.eps)
    return ((x - _bc(mean)) * _bc(inv * state.gamma) + _bc(state.beta)).astype(x.dtype, copy=False)


def batchnorm_bwd(
    x: np.ndarray, state: BatchNormState, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not state.training:
        raise ModeError("batchnorm backward is defined for training mode only")
    mean, var, count = _batch_stats(x)
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (x - _bc(mean)) * _bc(inv)
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3))
    grad_x = _bc(state.gamma * inv / count) * (
        count * grad_out - _bc(grad_beta) - xhat * _bc(grad_gamma)
    )
    return grad_x.astype(x.dtype, copy=False), grad_gamma, grad_beta
