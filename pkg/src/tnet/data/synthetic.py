"""Desk-scale synthetic segmentation data.

Each class owns one shape family and one base colour; class 0 is a textured
background. Per-pixel colour noise is uniform in +-0.05, so classes remain
separable by colour while boundaries still have to be localized.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..tensor import Rng
from .dataset import Sample

CLASS_COLORS = np.array(
    [
        [0.45, 0.45, 0.40],  # background base
        [0.90, 0.15, 0.15],
        [0.15, 0.80, 0.20],
        [0.15, 0.25, 0.90],
        [0.95, 0.90, 0.15],
        [0.85, 0.20, 0.85],
        [0.10, 0.85, 0.85],
        [0.95, 0.60, 0.10],
    ]
)
NOISE = 0.05
BG_RANGE = (0.2, 0.9)
# two cells of the stride-4 logit grid; thinner structures are not resolvable
MIN_WIDTH = 8.0


def _shape_mask(cls: int, size: int, rng: Rng) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(0, size, 2)
    half = MIN_WIDTH / 2
    r = rng.uniform(max(size * 0.10, MIN_WIDTH), size * 0.22, 1)[0]
    if cls == 1:  # axis-aligned rectangle
        hh, hw = rng.uniform(max(size * 0.08, half), size * 0.22, 2)
        return (np.abs(yy - cy) <= hh) & (np.abs(xx - cx) <= hw)
    if cls == 2:  # disk
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if cls == 3:  # diagonal stripe
        ang = rng.uniform(0, np.pi, 1)[0]
        d = (yy - cy) * np.cos(ang) - (xx - cx) * np.sin(ang)
        return np.abs(d) <= rng.uniform(max(size * 0.04, half), max(size * 0.08, half * 1.6), 1)[0]
    if cls == 4:  # triangle
        t = (yy - cy + r) / (2 * r)
        return (t >= 0) & (t <= 1) & (np.abs(xx - cx) <= t * r)
    if cls == 5:  # ellipse
        a, b = rng.uniform(max(size * 0.06, half), size * 0.25, 2)
        return ((yy - cy) / a) ** 2 + ((xx - cx) / b) ** 2 <= 1
    if cls == 6:  # ring
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        return (d2 <= r * r) & (d2 >= max(0.0, r - MIN_WIDTH) ** 2)
    # cross
    arm = max(half, 0.3 * r)
    return ((np.abs(yy - cy) <= arm) & (np.abs(xx - cx) <= r)) | ((np.abs(xx - cx) <= arm) & (np.abs(yy - cy) <= r))


def _one(i: int, k: int, size: int, rng: Rng) -> Sample:
    for _ in range(100):
        mask = np.zeros((size, size), dtype=np.uint8)
        for cls in range(1, k):
            for _ in range(1 + int(rng.random(1)[0] < 0.5)):
                mask[_shape_mask(cls, size, rng)] = cls
        bg = float((mask == 0).mean())
        if BG_RANGE[0] <= bg <= BG_RANGE[1]:
            break
    else:  # pragma: no cover - 100 rejections never happen with these sizes
        raise ConfigError("could not satisfy the background-fraction constraint")
    yy, xx = np.mgrid[0:size, 0:size] / size
    fy, fx, ph = rng.uniform(2.0, 6.0, 3)
    texture = 0.06 * np.sin(2 * np.pi * (fy * yy + fx * xx) + ph)
    img = CLASS_COLORS[mask].transpose(2, 0, 1).copy()
    img += np.where(mask == 0, texture, 0.0)[None]
    img += rng.uniform(-NOISE, NOISE, img.size).reshape(img.shape)
    return Sample(np.clip(img, 0, 1).astype(np.float32), mask, f"syn{i:05d}")


def gen_synthetic(n_images: int, num_classes: int, size: int, seed: int) -> list[Sample]:
    if not 2 <= num_classes <= len(CLASS_COLORS):
        raise ConfigError(f"synthetic data supports 2..{len(CLASS_COLORS)} classes, got {num_classes}")
    if size % 32 or size < 32:
        raise ConfigError(f"synthetic image size must be a positive multiple of 32, got {size}")
    root = Rng(seed)
    return [_one(i, num_classes, size, root.spawn(i)) for i in range(n_images)]
