"""Numpy implementations of the low-level kernels.

Accumulation order matches the compiled core exactly, so both backends give
bitwise-identical results.
"""
import numpy as np


def _out_extent(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(x, k, stride, pad):
    n, c, h, w = x.shape
    ho, wo = _out_extent(h, k, stride, pad), _out_extent(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((c, k, k, n, ho, wo), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            cols[:, ki, kj] = xp[:, :, ki:ki + stride * (ho - 1) + 1:stride,
                                 kj:kj + stride * (wo - 1) + 1:stride].transpose(1, 0, 2, 3)
    return cols.reshape(c * k * k, n * ho * wo)


def col2im(cols, shape, k, stride, pad):
    n, c, h, w = shape
    ho, wo = _out_extent(h, k, stride, pad), _out_extent(w, k, stride, pad)
    cols = cols.reshape(c, k, k, n, ho, wo)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            xp[:, :, ki:ki + stride * (ho - 1) + 1:stride,
               kj:kj + stride * (wo - 1) + 1:stride] += cols[:, ki, kj].transpose(1, 0, 2, 3)
    return np.ascontiguousarray(xp[:, :, pad:pad + h, pad:pad + w])


def maxpool2x2(x):
    n, c, h, w = x.shape
    windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, h // 2, w // 2, 4)
    # argmax returns the first maximum, i.e. row-major tie-breaking
    idx = windows.argmax(axis=-1).astype(np.int8)
    out = np.take_along_axis(windows, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2x2_backward(grad_out, idx):
    n, c, ho, wo = grad_out.shape
    windows = np.zeros((n, c, ho, wo, 4), dtype=grad_out.dtype)
    np.put_along_axis(windows, idx[..., None].astype(np.intp), grad_out[..., None], axis=-1)
    windows = windows.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(windows.reshape(n, c, 2 * ho, 2 * wo))
