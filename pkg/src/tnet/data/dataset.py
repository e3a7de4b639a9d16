"""Samples, folder ingestion and deterministic batching."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import DataError
from ..objective import IGNORE
from ..tensor import Rng


@dataclass
class Sample:
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    mask: np.ndarray  # (H, W) uint8 labels, IGNORE allowed
    id: str = ""

    def __post_init__(self):
        if self.image.ndim != 3 or self.mask.shape != self.image.shape[1:]:
            raise DataError(f"sample {self.id!r}: image {self.image.shape} and mask {self.mask.shape} disagree")


def validate_labels(dataset: Sequence[Sample], num_classes: int) -> None:
    for s in dataset:
        m = s.mask
        bad = (m != IGNORE) & (m >= num_classes)
        if bad.any():
            raise DataError(f"sample {s.id!r}: label {int(m[bad][0])} is not a valid class for K={num_classes}")


def load_folder(images_dir, masks_dir, num_classes: int | None = None) -> list[Sample]:
    """Pair ``images_dir/*.ppm`` with ``masks_dir/*.pgm`` by basename."""
    from .pnm import read_pgm, read_ppm

    def stems(d, ext):
        try:
            names = os.listdir(d)
        except OSError as e:
            raise DataError(f"{d}: {e.strerror}") from e
        return {os.path.splitext(n)[0]: os.path.join(d, n) for n in names if n.lower().endswith(ext)}

    imgs, masks = stems(images_dir, ".ppm"), stems(masks_dir, ".pgm")
    unpaired = sorted(set(imgs) ^ set(masks))
    if unpaired:
        where = "masks" if unpaired[0] in imgs else "images"
        raise DataError(f"{unpaired[0]!r} has no counterpart in {where} directory")
    if not imgs:
        raise DataError(f"no .ppm images found in {images_dir}")
    out = []
    for stem in sorted(imgs):
        image, mask = read_ppm(imgs[stem]), read_pgm(masks[stem])
        if image.shape[1:] != mask.shape:
            raise DataError(f"{stem}: image is {image.shape[2]}x{image.shape[1]} but mask is {mask.shape[1]}x{mask.shape[0]}")
        out.append(Sample(image, mask, stem))
    if num_classes is not None:
        validate_labels(out, num_classes)
    return out


def save_folder(dataset: Sequence[Sample], root) -> None:
    from .pnm import write_pgm, write_ppm

    for s in dataset:
        write_ppm(s.image, os.path.join(root, "images", f"{s.id}.ppm"))
        write_pgm(s.mask, os.path.join(root, "masks", f"{s.id}.pgm"))


def epoch_order(n: int, shuffle_seed: int | None, epoch: int) -> np.ndarray:
    if shuffle_seed is None:
        return np.arange(n)
    return Rng(shuffle_seed).spawn(epoch).permutation(n)


def batch_iter(
    dataset: Sequence[Sample],
    batch_size: int,
    shuffle_seed: int | None,
    epoch: int,
    transform: Callable[[Sample, int], Sample] | None = None,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(images (n,3,h,w), masks (n,h,w))``; the final batch may be short.

    ``transform(sample, dataset_index)`` is applied per sample before stacking.
    """
    order = epoch_order(len(dataset), shuffle_seed, epoch)
    for start in range(0, len(order), batch_size):
        picked = [dataset[int(i)] if transform is None else transform(dataset[int(i)], int(i))
                  for i in order[start:start + batch_size]]
        shapes = {s.image.shape for s in picked}
        if len(shapes) != 1:
            raise DataError(f"cannot batch samples of different sizes {sorted(shapes)}")
        yield np.stack([s.image for s in picked]), np.stack([s.mask for s in picked])
