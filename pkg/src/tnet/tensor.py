"""Rank-4 NCHW arrays and the deterministic generator used for all randomness.

Tensors are plain ``numpy.ndarray`` objects with ``ndim == 4``; the helpers
here validate that contract and implement the few structural operations the
rest of the package relies on.
"""
from __future__ import annotations

import contextlib
from typing import Iterator, Sequence

import numpy as np

from .errors import ShapeError

Tensor = np.ndarray

_default_dtype = np.float32


def default_dtype() -> type:
    return _default_dtype


@contextlib.contextmanager
def float64_mode() -> Iterator[None]:
    """Make newly created tensors float64 (used by gradient checks)."""
    global _default_dtype
    prev = _default_dtype
    _default_dtype = np.float64
    try:
        yield
    finally:
        _default_dtype = prev


def check_shape(shape: Sequence[int]) -> tuple[int, int, int, int]:
    shape = tuple(int(d) for d in shape)
    if len(shape) != 4:
        raise ShapeError(f"expected a rank-4 NCHW shape, got {shape}")
    if min(shape) < 1:
        raise ShapeError(f"invalid shape {shape}: every dimension must be >= 1")
    return shape  # type: ignore[return-value]


def check_tensor(x: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        raise ShapeError(f"{name} must be a rank-4 NCHW array, got {getattr(x, 'shape', type(x))}")
    check_shape(x.shape)
    return x


def zeros(shape: Sequence[int], dtype=None) -> Tensor:
    return np.zeros(check_shape(shape), dtype=dtype or _default_dtype)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"cannot add tensors of shapes {a.shape} and {b.shape}")
    return a + b


def pad_spatial(x: Tensor, pad: int, value: float = 0.0) -> Tensor:
    if pad < 0:
        raise ShapeError(f"pad must be >= 0, got {pad}")
    if pad == 0:
        return x.copy()
    n, c, h, w = x.shape
    out = np.full((n, c, h + 2 * pad, w + 2 * pad), value, dtype=x.dtype)
    out[:, :, pad:pad + h, pad:pad + w] = x
    return out


def crop_spatial(x: Tensor, pad: int) -> Tensor:
    if pad == 0:
        return x.copy()
    return x[:, :, pad:-pad, pad:-pad].copy()


def flat_index(shape: Sequence[int], n: int, c: int, h: int, w: int) -> int:
    _, C, H, W = shape
    return ((n * C + c) * H + h) * W + w


def unflat_index(shape: Sequence[int], idx: int) -> tuple[int, int, int, int]:
    _, C, H, W = shape
    idx, w = divmod(idx, W)
    idx, h = divmod(idx, H)
    n, c = divmod(idx, C)
    return n, c, h, w


_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 counter generator.

    Output ``i`` (1-based, counting every draw ever made) is
    ``mix(seed + i * 0x9E3779B97F4A7C15 mod 2**64)`` with the standard
    SplitMix64 finalizer, so the integer stream depends only on the seed.
    Floats take the top 53 bits; normals use Box-Muller on pairs of floats.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def uint64(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + k * _GAMMA)

    def random(self, n: int = 1) -> np.ndarray:
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float, n: int = 1) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def normal(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u = self.random(2 * m)
        r = np.sqrt(-2.0 * np.log1p(-u[:m]))
        theta = 2.0 * np.pi * u[m:]
        return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]

    def integers(self, low: int, high: int, n: int = 1) -> np.ndarray:
        """Uniform integers in ``[low, high)``."""
        return low + (self.uint64(n) % np.uint64(high - low)).astype(np.int64)

    def randint(self, low: int, high: int) -> int:
        return int(self.integers(low, high, 1)[0])

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uint64(n), kind="stable")

    def spawn(self, *keys: int) -> "Rng":
        """Independent child generator for ``keys`` (e.g. epoch, sample index)."""
        s = np.uint64(self.seed)
        with np.errstate(over="ignore"):
            for k in keys:
                s = _mix(s ^ _mix(np.uint64(int(k) & _MASK) + _GAMMA))
        return Rng(int(s))


def he_init(shape: Sequence[int], fan_in: int, rng: Rng, dtype=None) -> Tensor:
    """He-normal weights, std ``sqrt(2 / fan_in)``."""
    shape = check_shape(shape)
    if fan_in < 1:
        raise ShapeError(f"fan_in must be >= 1, got {fan_in}")
    std = np.sqrt(2.0 / fan_in)
    vals = rng.normal(int(np.prod(shape))) * std
    return vals.reshape(shape).astype(dtype or _default_dtype)
