"""Cross-entropy + soft Dice segmentation loss with gradients w.r.t. logits.

Masks are integer ``(n, h, w)`` arrays; pixels labelled :data:`IGNORE` carry no
loss and receive zero gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError

IGNORE = 255
DICE_SMOOTH = 1.0


@dataclass
class LossOutput:
    ce: float
    dice: float
    total: float
    grad_logits: np.ndarray


def softmax_channels(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _targets(mask: np.ndarray, k: int, shape) -> tuple[np.ndarray, np.ndarray]:
    """One-hot targets ``(n, k, h, w)`` and the valid-pixel mask ``(n, 1, h, w)``."""
    if mask.shape != (shape[0], shape[2], shape[3]):
        raise ShapeError(f"mask shape {mask.shape} does not match logits {shape}")
    valid = mask != IGNORE
    bad = valid & ((mask < 0) | (mask >= k))
    if bad.any():
        raise ShapeError(f"mask contains label {int(mask[bad][0])} outside [0, {k})")
    safe = np.where(valid, mask, 0)
    onehot = (safe[:, None, :, :] == np.arange(k).reshape(1, k, 1, 1)) & valid[:, None]
    return onehot, valid[:, None]


def cross_entropy(logits: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean ``-log p_true`` over non-ignored pixels."""
    k = logits.shape[1]
    onehot, valid = _targets(mask, k, logits.shape)
    count = int(valid.sum())
    if count == 0:
        raise NumericError("cross entropy is undefined: every pixel is ignored")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    loss = -float(np.sum(logp * onehot, dtype=np.float64)) / count
    grad = (np.exp(logp) - onehot) * valid / count
    return loss, grad.astype(logits.dtype, copy=False)


def dice_loss(probs: np.ndarray, mask: np.ndarray, smooth: float = DICE_SMOOTH) -> tuple[float, np.ndarray]:
    """``1 - mean_k (2 I_k + s) / (P_k + Y_k + s)`` with sums over all valid pixels of the batch."""
    k = probs.shape[1]
    onehot, valid = _targets(mask, k, probs.shape)
    pv = probs * valid
    inter = np.sum(pv * onehot, axis=(0, 2, 3), dtype=np.float64)
    psum = np.sum(pv, axis=(0, 2, 3), dtype=np.float64)
    ysum = np.sum(onehot, axis=(0, 2, 3), dtype=np.float64)
    num = 2 * inter + smooth
    den = psum + ysum + smooth
    loss = 1.0 - float(np.mean(num / den))
    # d/dp of -(1/K) sum_k num_k / den_k
    a = (-2.0 / (k * den)).reshape(1, k, 1, 1)
    b = (num / (k * den * den)).reshape(1, k, 1, 1)
    grad = (a * onehot + b) * valid
    return loss, grad.astype(probs.dtype, copy=False)


def softmax_bwd(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    return probs * (grad_probs - np.sum(probs * grad_probs, axis=1, keepdims=True))


def total_loss(logits: np.ndarray, mask: np.ndarray) -> LossOutput:
    ce, g_ce = cross_entropy(logits, mask)
    probs = softmax_channels(logits)
    dice, g_probs = dice_loss(probs, mask)
    grad = g_ce + softmax_bwd(probs, g_probs)
    return LossOutput(ce, dice, ce + dice, grad.astype(logits.dtype, copy=False))
