"""Separable bilinear resampling (half-pixel centers, edge clamped).

Resampling along one axis is a fixed matrix ``U`` (out x in); the 2-D op is
``U_h @ x @ U_w.T`` and its adjoint is ``U_h.T @ g @ U_w``.
"""
from __future__ import annotations

import functools

import numpy as np

from ..errors import ConfigError


@functools.lru_cache(maxsize=256)
def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    m.setflags(write=False)
    return m


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    uh = interp_matrix(x.shape[-2], out_h).astype(x.dtype)
    uw = interp_matrix(x.shape[-1], out_w).astype(x.dtype)
    return np.matmul(np.matmul(uh, x), uw.T)


def resize_bilinear_bwd(grad_out: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    uh = interp_matrix(in_h, grad_out.shape[-2]).astype(grad_out.dtype)
    uw = interp_matrix(in_w, grad_out.shape[-1]).astype(grad_out.dtype)
    return np.matmul(np.matmul(uh.T, grad_out), uw)


def _check_factor(factor: int) -> None:
    if int(factor) != factor or factor < 1:
        raise ConfigError(f"upsample factor must be a positive integer, got {factor}")


def bilinear_upsample(x: np.ndarray, factor: int) -> np.ndarray:
    _check_factor(factor)
    return resize_bilinear(x, x.shape[-2] * factor, x.shape[-1] * factor)


def bilinear_upsample_bwd(grad_out: np.ndarray, factor: int) -> np.ndarray:
    _check_factor(factor)
    return resize_bilinear_bwd(grad_out, grad_out.shape[-2] // factor, grad_out.shape[-1] // factor)
