# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled conv pack/unpack core: fused im2col / col2im loops.

Same layout contract as the numpy fallback: columns ordered (ki, kj, c),
rows ordered (b, ho, wo). BLAS matmul stays outside; only the memory
reshuffling is compiled.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def _conv_out_size(int size, int k, int stride, int pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(real[:, :, :, ::1] x, int kh, int kw, int stride, int pad):
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t ho = (H + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t wo = (W + 2 * pad - kw) // stride + 1
    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((B * ho * wo, kh * kw * C), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, ki, kj, c, row, col, hi, wj
    with nogil:
        for b in range(B):
            for i in range(ho):
                for j in range(wo):
                    row = (b * ho + i) * wo + j
                    for ki in range(kh):
                        hi = i * stride + ki - pad
                        if hi < 0 or hi >= H:
                            col = (ki * kw) * C
                            for kj in range(kw):
                                for c in range(C):
                                    out[row, col] = 0.0
                                    col += 1
                            continue
                        for kj in range(kw):
                            wj = j * stride + kj - pad
                            col = (ki * kw + kj) * C
                            if wj < 0 or wj >= W:
                                for c in range(C):
                                    out[row, col + c] = 0.0
                            else:
                                for c in range(C):
                                    out[row, col + c] = x[b, hi, wj, c]
    return out_arr


def col2im(real[:, ::1] cols, int B, int H, int W, int C, int kh, int kw, int stride, int pad):
    cdef Py_ssize_t ho = (H + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t wo = (W + 2 * pad - kw) // stride + 1
    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.zeros((B, H, W, C), dtype=dtype)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, ki, kj, c, row, col, hi, wj
    with nogil:
        for b in range(B):
            for i in range(ho):
                for j in range(wo):
                    row = (b * ho + i) * wo + j
                    for ki in range(kh):
                        hi = i * stride + ki - pad
                        if hi < 0 or hi >= H:
                            continue
                        for kj in range(kw):
                            wj = j * stride + kj - pad
                            if wj < 0 or wj >= W:
                                continue
                            col = (ki * kw + kj) * C
                            for c in range(C):
                                out[b, hi, wj, c] += cols[row, col + c]
    return out_arr
