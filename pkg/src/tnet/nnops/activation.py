"""Pointwise activations and their derivatives."""
from __future__ import annotations

import enum

import numpy as np

from ..errors import ConfigError

_GELU_C = np.sqrt(2.0 / np.pi)


class ActivationKind(str, enum.Enum):
    RELU6 = "relu6"
    RELU = "relu"
    GELU = "gelu"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, value) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"none": "identity", "-": "identity"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown activation {value!r}; choose from {[k.value for k in cls]}") from None


def activation_fwd(x: np.ndarray, kind: ActivationKind) -> np.ndarray:
    kind = ActivationKind.parse(kind)
    if kind is ActivationKind.RELU6:
        return np.clip(x, 0, 6)
    if kind is ActivationKind.RELU:
        return np.maximum(x, 0)
    if kind is ActivationKind.GELU:
        return (0.5 * x * (1 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))).astype(x.dtype, copy=False)
    return x.copy()


def activation_bwd(x: np.ndarray, grad_out: np.ndarray, kind: ActivationKind) -> np.ndarray:
    """Gradient w.r.t. the activation input. Kinks (0 and 6) get derivative 0."""
    kind = ActivationKind.parse(kind)
    if kind is ActivationKind.RELU6:
        return grad_out * ((x > 0) & (x < 6))
    if kind is ActivationKind.RELU:
        return grad_out * (x > 0)
    if kind is ActivationKind.GELU:
        u = _GELU_C * (x + 0.044715 * x**3)
        t = np.tanh(u)
        du = _GELU_C * (1 + 3 * 0.044715 * x**2)
        d = 0.5 * (1 + t) + 0.5 * x * (1 - t * t) * du
        return (grad_out * d).astype(grad_out.dtype, copy=False)
    return grad_out.copy()
