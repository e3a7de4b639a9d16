"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import statistics
import timeit

import numpy as np
from threadpoolctl import threadpool_limits

from tnet.model import TerraceConfig, build
from tnet.nnops import backend
from tnet.tensor import Rng


def _cases():
    rng = Rng(0)
    x_stem = rng.normal(8 * 3 * 64 * 64).reshape(8, 3, 64, 64).astype(np.float32)
    x_mid = rng.normal(8 * 32 * 16 * 16).reshape(8, 32, 16, 16).astype(np.float32)
    x_pool = rng.normal(8 * 16 * 32 * 32).reshape(8, 16, 32, 32).astype(np.float32)
    model = build(TerraceConfig(num_classes=4), seed=0)

    def make(name):
        k = backend.get(name)
        cols_stem = k.im2col(x_stem, 7, 2, 3)
        cols_mid = k.im2col(x_mid, 3, 1, 1)
        pooled, arg = k.maxpool_fwd(x_pool, 3, 2, 1)
        return {
            "im2col 7x7/2 (8,3,64,64)": lambda: k.im2col(x_stem, 7, 2, 3),
            "im2col 3x3/1 (8,32,16,16)": lambda: k.im2col(x_mid, 3, 1, 1),
            "col2im 7x7/2 (8,3,64,64)": lambda: k.col2im(cols_stem, x_stem.shape, 7, 2, 3),
            "col2im 3x3/1 (8,32,16,16)": lambda: k.col2im(cols_mid, x_mid.shape, 3, 1, 1),
            "maxpool fwd (8,16,32,32)": lambda: k.maxpool_fwd(x_pool, 3, 2, 1),
            "maxpool bwd (8,16,32,32)": lambda: k.maxpool_bwd(pooled, arg, x_pool.shape),
            "model fwd+bwd (8,3,64,64)": lambda: _step(model, x_stem),
        }

    return make


def _step(model, x):
    logits = model.forward(x)
    model.backward(np.ones_like(logits) / logits.size)
    model.registry.zero_grad()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    names = sorted(backend.BACKENDS)
    if "cython" not in names:
        print("compiled kernels are not built; only the numpy backend is available")
    make = _cases()
    results: dict[str, dict[str, float]] = {}
    prev = backend.NAME
    with threadpool_limits(1):
        for name in names:
            backend.use(name)
            for label, fn in make(name).items():
                fn()
                runs = timeit.repeat(fn, number=1, repeat=args.repeat)
                results.setdefault(label, {})[name] = statistics.median(runs) * 1e3
    backend.use(prev)
    header = f"{'case':<28}" + "".join(f"{n + ' ms':>14}" for n in names) + ("     speedup" if len(names) > 1 else "")
    print(header)
    for label, row in results.items():
        line = f"{label:<28}" + "".join(f"{row[n]:>14.2f}" for n in names)
        if len(names) > 1:
            line += f"{row['python'] / row['cython']:>11.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as f:
            json.dump(results, f, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
