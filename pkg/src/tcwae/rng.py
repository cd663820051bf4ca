"""Counter-based random state with explicit stream splitting.

Every consumer of randomness (parameter init, data order, reparameterization
noise, permutation sampling, metric votes, ...) gets its own stream derived
from a base seed, so runs are bit-reproducible regardless of evaluation
order or thread count. Built on numpy's Philox generator, whose output is
reproducible across platforms for a fixed (key, counter).
"""

from __future__ import annotations

import numpy as np

# Stream ids for the standard consumers of a training run.
STREAM_INIT = 1
STREAM_DATA = 2
STREAM_NOISE = 3
STREAM_PERMUTE = 4
STREAM_PRIOR = 5
STREAM_METRICS = 16
STREAM_TRAVERSE = 17


class RngState:
    """A (seed, stream) pair owning an independent Philox draw sequence.

    Two states constructed with the same (seed, stream) produce identical
    draw sequences. Drawing advances the internal counter; use ``split`` to
    derive independent child streams instead of sharing one state across
    consumers.
    """

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, stream: int) -> "RngState":
        """Fresh state for an independent consumer stream."""
        return RngState(self.seed, stream)

    def normal(self, shape=(), dtype=np.float64) -> np.ndarray:
        return self._gen.standard_normal(shape, dtype=np.float64).astype(dtype, copy=False)

    def uniform(self, shape=(), low=0.0, high=1.0, dtype=np.float64) -> np.ndarray:
        return self._gen.uniform(low, high, shape).astype(dtype, copy=False)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream={self.stream})"
