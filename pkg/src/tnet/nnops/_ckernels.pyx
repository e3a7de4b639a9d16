# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col / col2im / max-pool kernels (contract shared with _pykernels)."""
import numpy as np
cimport numpy as cnp

ctypedef fused real:
    float
    double


cpdef Py_ssize_t out_size(Py_ssize_t size, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    return (size + 2 * pad - k) // stride + 1


cdef inline void _col_range(Py_ssize_t ow, Py_ssize_t w, Py_ssize_t stride, Py_ssize_t off,
                            Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    # output columns xx with 0 <= xx*stride + off < w form the range [lo, hi)
    cdef Py_ssize_t a = 0, b
    if off < 0:
        a = (-off + stride - 1) // stride
    b = (w - off + stride - 1) // stride if w > off else 0
    if b > ow:
        b = ow
    if a > b:
        a = b
    lo[0] = a
    hi[0] = b


def _im2col(real[:, :, :, ::1] x, real[:, :, ::1] out, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = out_size(h, k, stride, pad), ow = out_size(w, k, stride, pad)
    cdef Py_ssize_t b, ci, ki, kj, y, xx, r, iy, off, lo, hi
    cdef real* dst
    cdef real* src
    with nogil:
        for b in range(n):
            for ci in range(c):
                for ki in range(k):
                    for kj in range(k):
                        r = (ci * k + ki) * k + kj
                        off = kj - pad
                        _col_range(ow, w, stride, off, &lo, &hi)
                        for y in range(oh):
                            dst = &out[b, r, y * ow]
                            iy = y * stride - pad + ki
                            if iy < 0 or iy >= h:
                                for xx in range(ow):
                                    dst[xx] = 0
                                continue
                            src = &x[b, ci, iy, 0]
                            for xx in range(lo):
                                dst[xx] = 0
                            if stride == 1:
                                for xx in range(lo, hi):
                                    dst[xx] = src[xx + off]
                            else:
                                for xx in range(lo, hi):
                                    dst[xx] = src[xx * stride + off]
                            for xx in range(hi, ow):
                                dst[xx] = 0


def _col2im(real[:, :, ::1] cols, real[:, :, :, ::1] out, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1], h = out.shape[2], w = out.shape[3]
    cdef Py_ssize_t oh = out_size(h, k, stride, pad), ow = out_size(w, k, stride, pad)
    cdef Py_ssize_t b, ci, ki, kj, y, xx, r, iy, off, lo, hi
    cdef real* dst
    cdef real* src
    with nogil:
        for b in range(n):
            for ci in range(c):
                for ki in range(k):
                    for kj in range(k):
                        r = (ci * k + ki) * k + kj
                        off = kj - pad
                        _col_range(ow, w, stride, off, &lo, &hi)
                        for y in range(oh):
                            iy = y * stride - pad + ki
                            if iy < 0 or iy >= h:
                                continue
                            src = &cols[b, r, y * ow]
                            dst = &out[b, ci, iy, 0]
                            if stride == 1:
                                for xx in range(lo, hi):
                                    dst[xx + off] += src[xx]
                            else:
                                for xx in range(lo, hi):
                                    dst[xx * stride + off] += src[xx]


def im2col(x, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    out = np.empty((n, c * k * k, out_size(h, k, stride, pad) * out_size(w, k, stride, pad)), dtype=x.dtype)
    _im2col(x, out, k, stride, pad)
    return out


def col2im(cols, shape, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    n, c, h, w = shape
    cols = np.ascontiguousarray(cols).reshape(n, c * k * k, -1)
    out = np.zeros(shape, dtype=cols.dtype)
    _col2im(cols, out, k, stride, pad)
    return out


def _maxpool_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] out, cnp.int64_t[:, :, :, ::1] arg,
                 Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t b, ci, y, xx, ki, kj, iy, ix, best_i
    cdef real best, v
    cdef bint found
    with nogil:
        for b in range(n):
            for ci in range(c):
                for y in range(oh):
                    for xx in range(ow):
                        found = False
                        best = 0
                        best_i = 0
                        for ki in range(k):
                            iy = y * stride - pad + ki
                            if iy < 0 or iy >= h:
                                continue
                            for kj in range(k):
                                ix = xx * stride - pad + kj
                                if ix < 0 or ix >= w:
                                    continue
                                v = x[b, ci, iy, ix]
                                if not found or v > best:
                                    best = v
                                    best_i = iy * w + ix
                                    found = True
                        out[b, ci, y, xx] = best
                        arg[b, ci, y, xx] = best_i


def maxpool_fwd(x, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    oh, ow = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    arg = np.empty((n, c, oh, ow), dtype=np.int64)
    _maxpool_fwd(x, out, arg, k, stride, pad)
    return out, arg


def _maxpool_bwd(real[:, :, ::1] g, cnp.int64_t[:, :, ::1] arg, real[:, :, ::1] out):
    cdef Py_ssize_t n = g.shape[0], c = g.shape[1], m = g.shape[2], b, ci, i
    with nogil:
        for b in range(n):
            for ci in range(c):
                for i in range(m):
                    out[b, ci, arg[b, ci, i]] += g[b, ci, i]


def maxpool_bwd(grad_out, argmax, shape):
    n, c, h, w = shape
    g = np.ascontiguousarray(grad_out).reshape(n, c, -1)
    out = np.zeros((n, c, h * w), dtype=g.dtype)
    _maxpool_bwd(g, np.ascontiguousarray(argmax, dtype=np.int64).reshape(n, c, -1), out)
    return out.reshape(shape)
