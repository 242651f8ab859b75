# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col/col2im and 2x2 max-pool kernels."""
from libc.string cimport memcpy

import numpy as np

ctypedef fused real:
    float
    double


cdef inline Py_ssize_t _out_extent(Py_ssize_t size, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    return (size + 2 * pad - k) // stride + 1


cdef inline void _col_range(Py_ssize_t kj, Py_ssize_t stride, Py_ssize_t pad, Py_ssize_t w,
                            Py_ssize_t wo, Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    # output columns oj with 0 <= oj*stride - pad + kj < w
    cdef Py_ssize_t first = pad - kj
    lo[0] = 0 if first <= 0 else (first + stride - 1) // stride
    hi[0] = (w - 1 + pad - kj) // stride + 1 if w - 1 + pad - kj >= 0 else 0
    if hi[0] > wo:
        hi[0] = wo
    if lo[0] > hi[0]:
        lo[0] = hi[0]


def im2col(real[:, :, :, ::1] x, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = _out_extent(h, k, stride, pad), wo = _out_extent(w, k, stride, pad)
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((c * k * k, n * ho * wo), dtype=dtype)
    cdef real[:, ::1] cols = out
    cdef Py_ssize_t b, ch, ki, kj, oi, oj, row, hi, lo_j, hi_j, shift
    cdef real* dst
    cdef real* src
    with nogil:
        for ch in range(c):
            for ki in range(k):
                for kj in range(k):
                    row = (ch * k + ki) * k + kj
                    _col_range(kj, stride, pad, w, wo, &lo_j, &hi_j)
                    shift = kj - pad
                    for b in range(n):
                        for oi in range(ho):
                            hi = oi * stride - pad + ki
                            if hi < 0 or hi >= h:
                                continue
                            dst = &cols[row, (b * ho + oi) * wo]
                            src = &x[b, ch, hi, 0]
                            if stride == 1:
                                if hi_j > lo_j:
                                    memcpy(dst + lo_j, src + lo_j + shift,
                                           (hi_j - lo_j) * sizeof(real))
                            else:
                                for oj in range(lo_j, hi_j):
                                    dst[oj] = src[oj * stride + shift]
    return out


def col2im(real[:, ::1] cols, shape, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t ho = _out_extent(h, k, stride, pad), wo = _out_extent(w, k, stride, pad)
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] x = out
    cdef Py_ssize_t b, ch, ki, kj, oi, oj, row, hi, lo_j, hi_j, shift
    cdef real* dst
    cdef real* src
    with nogil:
        for ch in range(c):
            for ki in range(k):
                for kj in range(k):
                    row = (ch * k + ki) * k + kj
                    _col_range(kj, stride, pad, w, wo, &lo_j, &hi_j)
                    shift = kj - pad
                    for b in range(n):
                        for oi in range(ho):
                            hi = oi * stride - pad + ki
                            if hi < 0 or hi >= h:
                                continue
                            src = &cols[row, (b * ho + oi) * wo]
                            dst = &x[b, ch, hi, 0]
                            for oj in range(lo_j, hi_j):
                                dst[oj * stride + shift] += src[oj]
    return out


def maxpool2x2(real[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], ho = x.shape[2] // 2, wo = x.shape[3] // 2
    dtype = np.float32 if real is float else np.float64
    out = np.empty((n, c, ho, wo), dtype=dtype)
    idx_arr = np.empty((n, c, ho, wo), dtype=np.int8)
    cdef real[:, :, :, ::1] y = out
    cdef signed char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t b, ch, i, j
    cdef real best, v
    cdef signed char arg
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(ho):
                    for j in range(wo):
                        best = x[b, ch, 2 * i, 2 * j]
                        arg = 0
                        v = x[b, ch, 2 * i, 2 * j + 1]
                        if v > best:
                            best = v
                            arg = 1
                        v = x[b, ch, 2 * i + 1, 2 * j]
                        if v > best:
                            best = v
                            arg = 2
                        v = x[b, ch, 2 * i + 1, 2 * j + 1]
                        if v > best:
                            best = v
                            arg = 3
                        y[b, ch, i, j] = best
                        idx[b, ch, i, j] = arg
    return out, idx_arr


def maxpool2x2_backward(real[:, :, :, ::1] grad_out, signed char[:, :, :, ::1] idx):
    cdef Py_ssize_t n = grad_out.shape[0], c = grad_out.shape[1]
    cdef Py_ssize_t ho = grad_out.shape[2], wo = grad_out.shape[3]
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c, 2 * ho, 2 * wo), dtype=dtype)
    cdef real[:, :, :, ::1] g = out
    cdef Py_ssize_t b, ch, i, j
    cdef signed char a
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(ho):
                    for j in range(wo):
                        a = idx[b, ch, i, j]
                        g[b, ch, 2 * i + a // 2, 2 * j + a % 2] = grad_out[b, ch, i, j]
    return out
