"""Numerically stable scalar reductions used across the estimators."""

from __future__ import annotations

import numpy as np


def logsumexp(values) -> float:
    """log sum exp of a sequence via max-shift; safe for magnitudes up to 1e300.

    Entries may be -inf (empty mixture components); the result is -inf only
    if every entry is.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty reduction")
    m = np.max(v)
    if not np.isfinite(m):
        if m == -np.inf:
            return float("-inf")
        raise ValueError("logsumexp requires entries < +inf")
    return float(m + np.log(np.sum(np.exp(v - m))))


def logsumexp_axis(a: np.ndarray, axis: int) -> np.ndarray:
    """Array form of ``logsumexp`` along one axis."""
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    z = np.exp(-np.abs(x))  # single exp, never overflows
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def assert_all_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
