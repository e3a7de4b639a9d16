"""Synthetic data, PPM/PGM interchange, augmentation and batching."""
from .augment import AugmentConfig, AugmentDraw, apply_draw, augment, draw
from .dataset import Sample, batch_iter, load_folder, save_folder, validate_labels
from .pnm import PALETTE, read_pgm, read_ppm, save_color, save_mask, write_pgm, write_ppm
from .synthetic import gen_synthetic

__all__ = [
    "AugmentConfig", "AugmentDraw", "apply_draw", "augment", "draw",
    "Sample", "batch_iter", "load_folder", "save_folder", "validate_labels",
    "PALETTE", "read_pgm", "read_ppm", "save_color", "save_mask", "write_pgm", "write_ppm",
    "gen_synthetic",
]
