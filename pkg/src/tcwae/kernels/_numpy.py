"""Pure-numpy conv pack/unpack kernels (stride-tricks + slice accumulation)."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

BACKEND_NAME = "numpy"


def conv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    B, H, W, C = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    ho = conv_out_size(H, kh, stride, pad)
    wo = conv_out_size(W, kw, stride, pad)
    sb, sh, sw, sc = x.strides
    windows = as_strided(
        x,
        shape=(B, ho, wo, kh, kw, C),
        strides=(sb, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )
    return windows.reshape(B * ho * wo, kh * kw * C)


def col2im(cols: np.ndarray, B: int, H: int, W: int, C: int, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    ho = conv_out_size(H, kh, stride, pad)
    wo = conv_out_size(W, kw, stride, pad)
    out = np.zeros((B, H + 2 * pad, W + 2 * pad, C), dtype=cols.dtype)
    cols6 = cols.reshape(B, ho, wo, kh, kw, C)
    for ki in range(kh):
        for kj in range(kw):
            out[:, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride, :] += cols6[:, :, :, ki, kj, :]
    if pad:
        out = out[:, pad : pad + H, pad : pad + W, :]
    return np.ascontiguousarray(out)
