"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is loaded. Setting ``TNET_PURE_PYTHON=1``
forces the fallback.
"""
import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if os.environ.get("TNET_PURE_PYTHON", "") not in ("", "0") or _ckernels is None:
    NAME = "python"
else:
    NAME = "cython"

kernels = BACKENDS[NAME]


def use(name: str) -> None:
    """Switch the active backend at runtime (benchmarks and tests)."""
    global kernels, NAME
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    kernels = BACKENDS[name]
    NAME = name


def get(name: str):
    return BACKENDS[name]
