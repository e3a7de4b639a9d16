"""Training-time augmentation: scale, flips, 90-degree rotation, crop.

Every geometric step is applied identically to image and mask; images are
resampled bilinearly, masks by nearest neighbour.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..nnops.upsample import resize_bilinear
from ..objective import IGNORE
from ..tensor import Rng
from .dataset import Sample

SCALES = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass(frozen=True)
class AugmentConfig:
    scales: tuple = SCALES
    hflip_p: float = 0.5
    vflip_p: float = 0.5
    rot90_p: float = 0.5
    crop: int = 64

    def __post_init__(self):
        if self.crop % 32 or self.crop < 32:
            raise ConfigError(f"crop must be a positive multiple of 32, got {self.crop}")
        if not self.scales or min(self.scales) <= 0:
            raise ConfigError(f"scales must be positive, got {self.scales}")


@dataclass(frozen=True)
class AugmentDraw:
    scale: float = 1.0
    hflip: bool = False
    vflip: bool = False
    rot90: int = 0  # quarter turns, counter-clockwise
    top: int = 0  # crop offset in the (possibly padded) transformed frame
    left: int = 0


def _nearest(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = mask.shape
    ri = np.minimum(((np.arange(out_h) + 0.5) * h / out_h).astype(np.int64), h - 1)
    ci = np.minimum(((np.arange(out_w) + 0.5) * w / out_w).astype(np.int64), w - 1)
    return mask[ri[:, None], ci[None, :]]


def _geometry(sample: Sample, d: AugmentDraw) -> tuple[np.ndarray, np.ndarray]:
    img, mask = sample.image, sample.mask
    if d.scale != 1.0:
        h, w = mask.shape
        nh, nw = max(1, round(h * d.scale)), max(1, round(w * d.scale))
        img = resize_bilinear(img, nh, nw).astype(np.float32)
        mask = _nearest(mask, nh, nw)
    if d.hflip:
        img, mask = img[:, :, ::-1], mask[:, ::-1]
    if d.vflip:
        img, mask = img[:, ::-1, :], mask[::-1, :]
    if d.rot90:
        img, mask = np.rot90(img, d.rot90, axes=(1, 2)), np.rot90(mask, d.rot90)
    return img, mask


def _padded_extent(size: int, crop: int) -> int:
    return max(size, crop)


def draw(sample: Sample, cfg: AugmentConfig, rng: Rng) -> AugmentDraw:
    u = rng.random(4)
    scale = float(cfg.scales[rng.randint(0, len(cfg.scales))])
    rot = rng.randint(1, 4) if u[2] < cfg.rot90_p else 0
    h, w = sample.mask.shape
    nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
    if rot % 2:
        nh, nw = nw, nh
    top = rng.randint(0, _padded_extent(nh, cfg.crop) - cfg.crop + 1)
    left = rng.randint(0, _padded_extent(nw, cfg.crop) - cfg.crop + 1)
    return AugmentDraw(scale, bool(u[0] < cfg.hflip_p), bool(u[1] < cfg.vflip_p), rot, top, left)


def apply_draw(sample: Sample, d: AugmentDraw, crop: int) -> Sample:
    """Apply a fixed draw. Frames smaller than ``crop`` are padded (zeros / IGNORE) at the bottom-right."""
    img, mask = _geometry(sample, d)
    h, w = mask.shape
    ph, pw = _padded_extent(h, crop), _padded_extent(w, crop)
    if (ph, pw) != (h, w):
        canvas = np.zeros((img.shape[0], ph, pw), dtype=np.float32)
        mcanvas = np.full((ph, pw), IGNORE, dtype=mask.dtype)
        canvas[:, :h, :w] = img
        mcanvas[:h, :w] = mask
        img, mask = canvas, mcanvas
    img = img[:, d.top:d.top + crop, d.left:d.left + crop]
    mask = mask[d.top:d.top + crop, d.left:d.left + crop]
    return Sample(np.ascontiguousarray(img, dtype=np.float32), np.ascontiguousarray(mask), sample.id)


def augment(sample: Sample, cfg: AugmentConfig, rng: Rng) -> Sample:
    return apply_draw(sample, draw(sample, cfg, rng), cfg.crop)
