"""Conv pack/unpack kernels with import-time backend selection.

The compiled Cython core is preferred when importable; the numpy
stride-tricks fallback is always available. ``TCWAE_KERNELS=numpy`` or
``TCWAE_KERNELS=compiled`` forces a backend (the latter raises if the
extension is missing). Both backends share the same layout contract and
are cross-checked in the test suite and compared in benchmarks/.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy

_choice = os.environ.get("TCWAE_KERNELS", "auto").lower()
_compiled = None
if _choice in ("auto", "compiled"):
    try:
        from . import _convcore as _compiled  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        _compiled = None

if _choice == "numpy":
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "numpy"


def _as_float_contig(x: np.ndarray) -> np.ndarray:
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    return np.ascontiguousarray(x)


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    if _compiled is not None:
        return _compiled.im2col(_as_float_contig(x), kh, kw, stride, pad)
    return _numpy.im2col(x, kh, kw, stride, pad)


def col2im(cols: np.ndarray, B: int, H: int, W: int, C: int, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    if _compiled is not None:
        return _compiled.col2im(_as_float_contig(cols), B, H, W, C, kh, kw, stride, pad)
    return _numpy.col2im(cols, B, H, W, C, kh, kw, stride, pad)


def numpy_backend():
    """The fallback module, exposed for benchmarking and equivalence tests."""
    return _numpy


def compiled_backend():
    """The compiled module or None when the extension is unavailable."""
    return _compiled


conv_out_size = _numpy.conv_out_size
