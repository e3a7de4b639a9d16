"""Slow, obviously-correct reference implementations used only by tests and gradcheck.

Nothing here touches the im2col kernels; every result is built from scalar
loops over the defining sums.
"""
from __future__ import annotations

import math

import numpy as np


def conv2d_direct(x, w, stride=1, padding=0, bias=None):
    """Seven nested loops over (n, o, oy, ox, c, ky, kx)."""
    n_, c_, h_, w_ = x.shape
    o_, _, k, _ = w.shape
    oh = (h_ + 2 * padding - k) // stride + 1
    ow = (w_ + 2 * padding - k) // stride + 1
    out = np.zeros((n_, o_, oh, ow), dtype=np.float64)
    for n in range(n_):
        for o in range(o_):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0 if bias is None else float(bias[o])
                    for c in range(c_):
                        for ky in range(k):
                            iy = oy * stride - padding + ky
                            if not 0 <= iy < h_:
                                continue
                            for kx in range(k):
                                ix = ox * stride - padding + kx
                                if 0 <= ix < w_:
                                    acc += float(x[n, c, iy, ix]) * float(w[o, c, ky, kx])
                    out[n, o, oy, ox] = acc
    return out


def conv_transpose2d_direct(x, w, stride, padding, output_padding):
    """Scatter form: every input pixel stamps its weighted kernel onto the output."""
    n_, ci_, h_, w_ = x.shape
    _, co_, k, _ = w.shape
    oh = (h_ - 1) * stride - 2 * padding + k + output_padding
    ow = (w_ - 1) * stride - 2 * padding + k + output_padding
    out = np.zeros((n_, co_, oh, ow), dtype=np.float64)
    for n in range(n_):
        for ci in range(ci_):
            for iy in range(h_):
                for ix in range(w_):
                    v = float(x[n, ci, iy, ix])
                    for co in range(co_):
                        for ky in range(k):
                            oy = iy * stride - padding + ky
                            if not 0 <= oy < oh:
                                continue
                            for kx in range(k):
                                ox = ix * stride - padding + kx
                                if 0 <= ox < ow:
                                    out[n, co, oy, ox] += v * float(w[ci, co, ky, kx])
    return out


def maxpool_direct(x, k=3, stride=2, padding=1):
    n_, c_, h_, w_ = x.shape
    oh = (h_ + 2 * padding - k) // stride + 1
    ow = (w_ + 2 * padding - k) // stride + 1
    out = np.zeros((n_, c_, oh, ow), dtype=np.float64)
    for n in range(n_):
        for c in range(c_):
            for oy in range(oh):
                for ox in range(ow):
                    best = -math.inf
                    for ky in range(k):
                        for kx in range(k):
                            iy, ix = oy * stride - padding + ky, ox * stride - padding + kx
                            if 0 <= iy < h_ and 0 <= ix < w_ and x[n, c, iy, ix] > best:
                                best = float(x[n, c, iy, ix])
                    out[n, c, oy, ox] = best
    return out


def bilinear_direct(x, out_h, out_w):
    """Per-output-pixel evaluation of the half-pixel bilinear formula."""
    n_, c_, h_, w_ = x.shape
    out = np.zeros((n_, c_, out_h, out_w), dtype=np.float64)

    def src(d, n_in, n_out):
        s = (d + 0.5) * n_in / n_out - 0.5
        s = min(max(s, 0.0), n_in - 1)
        i0 = int(math.floor(s))
        return i0, min(i0 + 1, n_in - 1), s - i0

    for oy in range(out_h):
        y0, y1, fy = src(oy, h_, out_h)
        for ox in range(out_w):
            x0, x1, fx = src(ox, w_, out_w)
            out[:, :, oy, ox] = (
                (1 - fy) * (1 - fx) * x[:, :, y0, x0]
                + (1 - fy) * fx * x[:, :, y0, x1]
                + fy * (1 - fx) * x[:, :, y1, x0]
                + fy * fx * x[:, :, y1, x1]
            )
    return out
