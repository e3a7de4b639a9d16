"""Pure-numpy kernels; same contract as the compiled ``_ckernels`` module."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(x, k, stride, pad):
    """(N, C, H, W) -> (N, C*k*k, OH*OW), rows ordered (c, ki, kj)."""
    n, c, h, w = x.shape
    oh, ow = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    return np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3)).reshape(n, c * k * k, oh * ow)


def col2im(cols, shape, k, stride, pad):
    """Adjoint of :func:`im2col`: scatter-add columns back onto an (N, C, H, W) grid."""
    n, c, h, w = shape
    oh, ow = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    cols = cols.reshape(n, c, k, k, oh, ow)
    hp, wp = h + 2 * pad, w + 2 * pad
    # canvas may need slack when the last window overhangs the padded edge
    canvas = np.zeros((n, c, max(hp, (oh - 1) * stride + k), max(wp, (ow - 1) * stride + k)), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            canvas[:, :, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += cols[:, :, ki, kj]
    return np.ascontiguousarray(canvas[:, :, pad:pad + h, pad:pad + w])


def maxpool_fwd(x, k, stride, pad):
    """Max pooling with -inf padding; argmax is the flat h*W+w index, first max wins."""
    n, c, h, w = x.shape
    oh, ow = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    win = win.reshape(n, c, oh, ow, k * k)
    local = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, local[..., None], axis=-1)[..., 0]
    ki, kj = np.divmod(local, k)
    rows = np.arange(oh)[:, None] * stride - pad + ki
    cols = np.arange(ow)[None, :] * stride - pad + kj
    return np.ascontiguousarray(out), (rows * w + cols).astype(np.int64)


def maxpool_bwd(grad_out, argmax, shape):
    n, c, h, w = shape
    grad = np.zeros((n * c, h * w), dtype=grad_out.dtype)
    g = grad_out.reshape(n * c, -1)
    a = argmax.reshape(n * c, -1)
    for i in range(n * c):
        grad[i] = np.bincount(a[i], weights=g[i], minlength=h * w)
    return grad.reshape(shape)
