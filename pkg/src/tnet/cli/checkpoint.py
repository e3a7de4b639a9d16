"""Binary checkpoint format.

Layout (little-endian)::

    b"TNET" | version u32 | entry count u32
    per entry: name length u16 | name (utf-8) | dtype u8 (0 = f32) | ndim u8 | dims u32 * ndim | payload
    CRC32 u32 of every preceding byte

Optimizer state, when present, is stored as extra entries named
``optim.step``, ``optim.m.<path>`` and ``optim.v.<path>``.
"""
from __future__ import annotations

import os
import struct
import zlib
from collections import OrderedDict

import numpy as np

from ..errors import DataError
from ..optim import AdamW

MAGIC = b"TNET"
VERSION = 1
DTYPE_F32 = 0
OPTIM_PREFIX = "optim."


def encode(arrays) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", DTYPE_F32, a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode(data: bytes, source: str = "<bytes>") -> "OrderedDict[str, np.ndarray]":
    if len(data) < 16 or data[:4] != MAGIC:
        raise DataError(f"{source}: not a TNET checkpoint")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise DataError(f"{source}: CRC mismatch, checkpoint is corrupted")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise DataError(f"{source}: unsupported checkpoint version {version}")
    off, end = 12, len(data) - 4
    out = OrderedDict()
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off:off + nlen].decode("utf-8")
            off += nlen
            dtype, ndim = struct.unpack_from("<BB", data, off)
            off += 2
            if dtype != DTYPE_F32:
                raise DataError(f"{source}: entry {name!r} has unknown dtype code {dtype}")
            dims = struct.unpack_from(f"<{ndim}I", data, off)
            off += 4 * ndim
            nbytes = 4 * int(np.prod(dims, dtype=np.int64))
            if off + nbytes > end:
                raise DataError(f"{source}: entry {name!r} runs past the end of the file")
            out[name] = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=off).reshape(dims).astype(np.float32)
            off += nbytes
    except (struct.error, UnicodeDecodeError) as e:
        raise DataError(f"{source}: malformed checkpoint ({e})") from None
    if off != end:
        raise DataError(f"{source}: {end - off} trailing bytes after the last entry")
    return out


def optimizer_arrays(opt: AdamW) -> "OrderedDict[str, np.ndarray]":
    out = OrderedDict([(OPTIM_PREFIX + "step", np.array([opt.step_count], dtype=np.float32))])
    for path in opt.m:
        out[f"{OPTIM_PREFIX}m.{path}"] = opt.m[path]
        out[f"{OPTIM_PREFIX}v.{path}"] = opt.v[path]
    return out


def save_checkpoint(path, model_arrays, optimizer: AdamW | None = None) -> None:
    arrays = OrderedDict(model_arrays)
    if optimizer is not None:
        arrays.update(optimizer_arrays(optimizer))
    data = encode(arrays)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple["OrderedDict[str, np.ndarray]", AdamW | None]:
    """Return (model arrays, optimizer or None); optimizer hyperparameters are defaults."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DataError(f"{path}: {e.strerror}") from None
    arrays = decode(data, str(path))
    model = OrderedDict((k, v) for k, v in arrays.items() if not k.startswith(OPTIM_PREFIX))
    if OPTIM_PREFIX + "step" not in arrays:
        return model, None
    opt = AdamW(step_count=int(arrays[OPTIM_PREFIX + "step"][0]))
    for k, v in arrays.items():
        if k.startswith(OPTIM_PREFIX + "m."):
            opt.m[k[len(OPTIM_PREFIX) + 2:]] = v
        elif k.startswith(OPTIM_PREFIX + "v."):
            opt.v[k[len(OPTIM_PREFIX) + 2:]] = v
    return model, opt
