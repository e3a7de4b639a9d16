"""Binary PPM (P6) images and PGM (P5) masks, 8-bit only."""
from __future__ import annotations

import os

import numpy as np

from ..errors import DataError
from ..objective import IGNORE

# index = class id; IGNORE renders black
PALETTE = np.array(
    [
        [255, 255, 255],
        [0, 0, 255],
        [0, 255, 255],
        [0, 255, 0],
        [255, 255, 0],
        [255, 0, 0],
        [255, 0, 255],
        [255, 128, 0],
    ],
    dtype=np.uint8,
)


def _parse(data: bytes, path) -> tuple[bytes, int, int, int, int]:
    """Split a netpbm file into (magic, width, height, maxval, payload offset)."""
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < len(data) and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise DataError(f"{path}: truncated header")
        tokens.append(data[start:i])
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: malformed header {tokens!r}") from None
    # exactly one whitespace byte separates the header from the raster
    return magic, width, height, maxval, i + 1


def _read(path, expected_magic: bytes, channels: int) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DataError(f"{path}: {e.strerror}") from e
    if data[:2] != expected_magic:
        raise DataError(f"{path}: expected magic {expected_magic.decode()}, found {data[:2]!r}")
    magic, width, height, maxval, off = _parse(data, path)
    if width < 1 or height < 1:
        raise DataError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise DataError(f"{path}: only 8-bit files (maxval 255) are supported, got {maxval}")
    n = width * height * channels
    if len(data) - off < n:
        raise DataError(f"{path}: expected {n} raster bytes, found {len(data) - off}")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=off).reshape(height, width, channels)


def read_ppm(path) -> np.ndarray:
    """(3, H, W) float32 in [0, 1]."""
    raw = _read(path, b"P6", 3)
    return (raw.transpose(2, 0, 1).astype(np.float32) / 255.0).astype(np.float32)


def read_pgm(path) -> np.ndarray:
    """(H, W) uint8 labels."""
    return _read(path, b"P5", 1)[:, :, 0].copy()


def _write(path, magic: bytes, raster: np.ndarray) -> None:
    h, w = raster.shape[:2]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(raster, dtype=np.uint8).tobytes())


def write_ppm(image: np.ndarray, path) -> None:
    """Write a (3, H, W) float image in [0, 1]."""
    raster = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    _write(path, b"P6", raster)


def write_pgm(mask: np.ndarray, path) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.min(initial=0) < 0 or mask.max(initial=0) > 255:
        raise DataError(f"{path}: mask must be 2-D with values in [0, 255]")
    _write(path, b"P5", mask.astype(np.uint8))


save_mask = write_pgm


def save_color(mask: np.ndarray, path) -> None:
    """Render labels with :data:`PALETTE` as a P6 image for inspection."""
    mask = np.asarray(mask).astype(np.int64)
    rgb = np.zeros(mask.shape + (3,), dtype=np.uint8)
    valid = mask != IGNORE
    rgb[valid] = PALETTE[mask[valid] % len(PALETTE)]
    _write(path, b"P6", rgb)
