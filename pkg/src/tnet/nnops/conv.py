"""Strided convolution and stride-2 transposed convolution with exact adjoints.

Both are cross-correlations lowered to im2col + GEMM; ``col2im`` is the exact
adjoint of ``im2col`` so each backward pass is the transpose of its forward.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from ..tensor import check_tensor
from . import backend

# kernel -> (padding, output_padding) giving H_out == 2 * H_in at stride 2
TRANSPOSE_PADDING = {3: (1, 1), 4: (1, 0), 6: (2, 0)}


@dataclass(frozen=True)
class ConvSpec:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0
    bias: bool = False

    @classmethod
    def same(cls, in_ch: int, out_ch: int, kernel: int, bias: bool = False) -> "ConvSpec":
        if kernel % 2 == 0:
            raise ConfigError(f"'same' convolution needs an odd kernel, got {kernel}")
        return cls(in_ch, out_ch, kernel, 1, (kernel - 1) // 2, bias)

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.padding - self.kernel) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"{self} produces an empty output for input {h}x{w}")
        return oh, ow

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_ch, self.in_ch, self.kernel, self.kernel)


@dataclass(frozen=True)
class ConvTransposeSpec:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 2
    padding: int | None = None
    output_padding: int | None = None

    def __post_init__(self):
        if self.stride != 2:
            raise ConfigError(f"transposed convolution supports stride 2 only, got {self.stride}")
        if self.padding is None or self.output_padding is None:
            k = self.kernel
            p, op = TRANSPOSE_PADDING.get(k, ((k - 1) // 2, 1) if k % 2 else ((k - 2) // 2, 0))
            object.__setattr__(self, "padding", p)
            object.__setattr__(self, "output_padding", op)
        if (self.kernel - 2 * self.padding + self.output_padding) != 2:
            raise ConfigError(f"{self} does not double the spatial size")

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        s, k, p, op = self.stride, self.kernel, self.padding, self.output_padding
        return (h - 1) * s - 2 * p + k + op, (w - 1) * s - 2 * p + k + op

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.in_ch, self.out_ch, self.kernel, self.kernel)


def _check_weight(w: np.ndarray, expected: tuple, what: str) -> None:
    if w.shape != expected:
        raise ShapeError(f"{what} weight has shape {w.shape}, expected {expected}")


def conv2d_fwd(x: np.ndarray, w: np.ndarray, spec: ConvSpec, bias: np.ndarray | None = None) -> np.ndarray:
    check_tensor(x, "conv2d input")
    if x.shape[1] != spec.in_ch:
        raise ShapeError(f"conv2d input has {x.shape[1]} channels, spec expects {spec.in_ch}")
    _check_weight(w, spec.weight_shape, "conv2d")
    n = x.shape[0]
    oh, ow = spec.out_hw(x.shape[2], x.shape[3])
    cols = backend.kernels.im2col(x, spec.kernel, spec.stride, spec.padding)
    y = np.matmul(w.reshape(spec.out_ch, -1), cols).reshape(n, spec.out_ch, oh, ow)
    if bias is not None:
        y += bias.reshape(1, -1, 1, 1)
    return y


def conv2d_bwd(x: np.ndarray, w: np.ndarray, grad_out: np.ndarray, spec: ConvSpec) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`conv2d_fwd` w.r.t. its input and weight (bias grad is ``grad_out.sum((0, 2, 3))``)."""
    n = x.shape[0]
    oh, ow = spec.out_hw(x.shape[2], x.shape[3])
    if grad_out.shape != (n, spec.out_ch, oh, ow):
        raise ShapeError(f"conv2d grad_out has shape {grad_out.shape}, expected {(n, spec.out_ch, oh, ow)}")
    cols = backend.kernels.im2col(x, spec.kernel, spec.stride, spec.padding)
    g = grad_out.reshape(n, spec.out_ch, oh * ow)
    grad_w = np.tensordot(g, cols, axes=([0, 2], [0, 2])).reshape(spec.weight_shape)
    grad_cols = np.matmul(w.reshape(spec.out_ch, -1).T, g)
    grad_x = backend.kernels.col2im(grad_cols, x.shape, spec.kernel, spec.stride, spec.padding)
    return grad_x, grad_w


def conv_transpose2d_fwd(x: np.ndarray, w: np.ndarray, spec: ConvTransposeSpec) -> np.ndarray:
    check_tensor(x, "conv_transpose2d input")
    if x.shape[1] != spec.in_ch:
        raise ShapeError(f"conv_transpose2d input has {x.shape[1]} channels, spec expects {spec.in_ch}")
    _check_weight(w, spec.weight_shape, "conv_transpose2d")
    n, _, h, wd = x.shape
    oh, ow = spec.out_hw(h, wd)
    cols = np.matmul(w.reshape(spec.in_ch, -1).T, x.reshape(n, spec.in_ch, h * wd))
    return backend.kernels.col2im(cols, (n, spec.out_ch, oh, ow), spec.kernel, spec.stride, spec.padding)


def conv_transpose2d_bwd(
    x: np.ndarray, w: np.ndarray, grad_out: np.ndarray, spec: ConvTransposeSpec
) -> tuple[np.ndarray, np.ndarray]:
    n, _, h, wd = x.shape
    oh, ow = spec.out_hw(h, wd)
    if grad_out.shape != (n, spec.out_ch, oh, ow):
        raise ShapeError(
            f"conv_transpose2d grad_out has shape {grad_out.shape}, expected {(n, spec.out_ch, oh, ow)}"
        )
    cols = backend.kernels.im2col(grad_out, spec.kernel, spec.stride, spec.padding)
    grad_x = np.matmul(w.reshape(spec.in_ch, -1), cols).reshape(x.shape)
    grad_w = np.tensordot(x.reshape(n, spec.in_ch, h * wd), cols, axes=([0, 2], [0, 2]))
    return grad_x, grad_w.reshape(spec.weight_shape)
