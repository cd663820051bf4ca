"""Diagonal Gaussians: the encoder posterior family and the latent prior.

Arrays may carry leading batch axes; the distribution axis is always the
last one, so a ``DiagonalGaussian`` with mean shape [B, d] is a batch of B
posteriors and indexing it yields the single-datum distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngState

LOG_VAR_MIN = -30.0
LOG_VAR_MAX = 30.0
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DiagonalGaussian:
    """Mean / log-variance pair; log-variance is clamped to [-30, 30]."""

    mean: np.ndarray
    log_var: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        log_var = self.log_var
        log_var = np.zeros_like(mean) if log_var is None else np.asarray(log_var, dtype=np.float64)
        if mean.shape != log_var.shape:
            raise ValueError(f"mean shape {mean.shape} != log_var shape {log_var.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "log_var", np.clip(log_var, LOG_VAR_MIN, LOG_VAR_MAX))

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def __len__(self) -> int:
        if self.mean.ndim < 2:
            raise TypeError("not a batch of Gaussians")
        return self.mean.shape[0]

    def __getitem__(self, i) -> "DiagonalGaussian":
        return DiagonalGaussian(self.mean[i], self.log_var[i])


def standard_prior(dim: int) -> DiagonalGaussian:
    return DiagonalGaussian(np.zeros(dim), np.zeros(dim))


def gaussian_log_prob(g: DiagonalGaussian, z: np.ndarray):
    """Sum over the last axis of the per-dimension log densities."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != g.mean.shape:
        raise ValueError(f"z shape {z.shape} != distribution shape {g.mean.shape}")
    per_dim = -0.5 * (_LOG_2PI + g.log_var) - 0.5 * (z - g.mean) ** 2 * np.exp(-g.log_var)
    out = np.sum(per_dim, axis=-1)
    return float(out) if out.ndim == 0 else out


def gaussian_sample(g: DiagonalGaussian, rng: RngState) -> np.ndarray:
    """Reparameterized draw mean + exp(log_var / 2) * eps."""
    eps = rng.normal(g.mean.shape)
    return g.mean + np.exp(0.5 * g.log_var) * eps


def kl_diag_gaussian_to_standard(g: DiagonalGaussian):
    """Closed-form KL(g || N(0, I)), summed over the last axis; >= 0."""
    per_dim = 0.5 * (g.mean ** 2 + np.exp(g.log_var) - 1.0 - g.log_var)
    out = np.sum(per_dim, axis=-1)
    return float(out) if out.ndim == 0 else out
