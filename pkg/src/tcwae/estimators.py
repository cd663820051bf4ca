"""Sample-based estimators of the marginal-KL decomposition terms.

Two density conventions coexist here, differing only by additive constants
(so gradients, and therefore training, are identical):

* ``mws_log_qz`` / ``mws_log_qz_dims`` return the minibatch-weighted
  estimate of E log q(z) in its standard form, subtracting
  log(dataset_size * batch_size) from the cross-evaluated mixture sum.
* The derived readouts (``tc_and_dimwise_kl_mws``, ``index_code_mi`` and
  the loss terms built on them) use the centered aggregate-density estimate
  log qhat(z_i) = logsumexp_j log q(z_i|x_j) - log(batch_size), which is
  consistent for the batch mixture: a representation whose aggregate equals
  the prior reads ~0 total-correlation and ~0 dimension-wise KL instead of
  carrying data-set-size offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .gaussians import DiagonalGaussian, gaussian_sample
from .rng import RngState

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LatentBatch:
    """A minibatch of latent codes with the posteriors that produced them."""

    codes: np.ndarray  # [B, d]
    posteriors: DiagonalGaussian  # mean/log_var of shape [B, d]

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.float64)
        if codes.ndim != 2:
            raise ValueError("codes must be [batch, dim]")
        if codes.shape != self.posteriors.mean.shape:
            raise ValueError("codes and posteriors disagree on shape")
        object.__setattr__(self, "codes", codes)

    @property
    def batch_size(self) -> int:
        return self.codes.shape[0]

    @property
    def dim(self) -> int:
        return self.codes.shape[1]


def sample_latent_batch(posteriors: DiagonalGaussian, rng: RngState) -> LatentBatch:
    """Draw one reparameterized code per posterior."""
    return LatentBatch(gaussian_sample(posteriors, rng), posteriors)


@dataclass(frozen=True)
class KernelConfig:
    """Mixture-of-IMQ configuration: sum over s of (s*C) / (s*C + ||x-y||^2)."""

    scales: Sequence[float] = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
    base: float = 2.0

    def __post_init__(self):
        if len(self.scales) == 0 or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be non-empty and strictly positive")
        if self.base <= 0:
            raise ValueError("base must be positive")


def default_kernel_config(dim: int) -> KernelConfig:
    """Scale set of the WAE line of work with C = 2*d for a unit-variance prior."""
    return KernelConfig(base=2.0 * dim)


# ---------------------------------------------------------------------------
# MWS terms. The *_graph functions accept autodiff Vars or plain arrays and
# are shared with the objectives; gradients flow through both the codes and
# the posterior parameters.
# ---------------------------------------------------------------------------


def pairwise_log_density_dims(codes, means, log_vars):
    """[B, B, d] array of the 1-D log density of code i under posterior j."""
    z = ad.reshape(codes, (ad.value_of(codes).shape[0], 1, -1))
    mu = ad.reshape(means, (1, ad.value_of(means).shape[0], -1))
    lv = ad.reshape(log_vars, (1, ad.value_of(log_vars).shape[0], -1))
    diff = ad.sub(z, mu)
    return ad.sub(
        ad.mul(ad.add(lv, _LOG_2PI), -0.5),
        ad.mul(ad.mul(ad.square(diff), ad.exp(ad.mul(lv, -1.0))), 0.5),
    )


def log_aggregate_and_dims(codes, means, log_vars):
    """Centered estimates (log qhat(z_i) [B], per-dimension log qhat_k [B, d])."""
    B = ad.value_of(codes).shape[0]
    per_dim = pairwise_log_density_dims(codes, means, log_vars)  # [B, B, d]
    joint = ad.sum_(per_dim, axis=2)  # [B, B]
    log_qhat = ad.sub(ad.logsumexp(joint, axis=1), float(np.log(B)))
    log_qhat_dims = ad.sub(ad.logsumexp(per_dim, axis=1), float(np.log(B)))
    return log_qhat, log_qhat_dims


def log_prior_dims(codes, prior: DiagonalGaussian):
    """[B, d] per-dimension log density of the codes under a factorized prior."""
    dt = ad.value_of(codes).dtype
    mu = prior.mean.reshape(1, -1).astype(dt, copy=False)
    lv = prior.log_var.reshape(1, -1).astype(dt, copy=False)
    diff = ad.sub(codes, mu)
    return ad.sub(
        (-0.5 * (lv + _LOG_2PI)).astype(dt, copy=False),
        ad.mul(ad.mul(ad.square(diff), np.exp(-lv).astype(dt, copy=False)), 0.5),
    )


def _check_batch(batch: LatentBatch, dataset_size: int):
    if batch.batch_size < 1:
        raise ValueError("empty batch")
    if dataset_size < batch.batch_size:
        raise ValueError("dataset smaller than batch")


def mws_log_qz(batch: LatentBatch, dataset_size: int) -> np.ndarray:
    """Minibatch-weighted estimate of log q(z) at each code.

    Entry i is logsumexp_j log q(z_i|x_j) - log(dataset_size * batch_size).
    """
    _check_batch(batch, dataset_size)
    log_qhat, _ = log_aggregate_and_dims(batch.codes, batch.posteriors.mean, batch.posteriors.log_var)
    return log_qhat - np.log(float(dataset_size))


def mws_log_qz_dims(batch: LatentBatch, dataset_size: int) -> np.ndarray:
    """Per-dimension analogue of ``mws_log_qz``; entry (i, k) uses only dim k."""
    _check_batch(batch, dataset_size)
    _, log_qhat_dims = log_aggregate_and_dims(batch.codes, batch.posteriors.mean, batch.posteriors.log_var)
    return log_qhat_dims - np.log(float(dataset_size))


def tc_and_dimwise_kl_mws(batch: LatentBatch, dataset_size: int, prior: DiagonalGaussian):
    """Centered MWS readouts of the total correlation and dimension-wise KL.

    tc + dimwise_kl telescopes exactly to mean_i[log qhat(z_i) - log p(z_i)],
    the minibatch estimate of the marginal KL(q(Z) || p(Z)).
    """
    _check_batch(batch, dataset_size)
    if prior.dim != batch.dim:
        raise ValueError("prior dimension does not match codes")
    log_qhat, log_qhat_dims = log_aggregate_and_dims(
        batch.codes, batch.posteriors.mean, batch.posteriors.log_var
    )
    log_p_dims = log_prior_dims(batch.codes, prior)
    tc = float(np.mean(log_qhat - np.sum(log_qhat_dims, axis=1)))
    dimwise = float(np.mean(np.sum(log_qhat_dims - log_p_dims, axis=1)))
    return tc, dimwise


def permute_dims(codes: np.ndarray, rng: RngState) -> np.ndarray:
    """Independent uniform permutation of each latent column.

    Turns a sample of the aggregate q(z) into a sample of the product of its
    marginals while preserving every column's multiset of values.
    """
    codes = np.asarray(codes)
    if codes.ndim != 2 or codes.shape[0] < 2:
        raise ValueError("permute_dims needs a [batch >= 2, dim] array")
    out = np.empty_like(codes)
    for k in range(codes.shape[1]):
        out[:, k] = codes[rng.permutation(codes.shape[0]), k]
    return out


def density_ratio_kl(logits):
    """Mean of (logit_q - logit_marginal); equals mean log D/(1-D) for softmax D."""
    lv = ad.value_of(logits)
    if lv.ndim != 2 or lv.shape[1] != 2:
        raise ValueError("logits must be [batch, 2]")
    diff = ad.sub(ad.take(logits, (slice(None), 0)), ad.take(logits, (slice(None), 1)))
    out = ad.mean(diff)
    return float(out) if not ad.is_var(out) else out


# ---------------------------------------------------------------------------
# IMQ kernel / MMD
# ---------------------------------------------------------------------------


def imq_kernel(x: np.ndarray, y: np.ndarray, cfg: KernelConfig) -> float:
    """Mixture-of-IMQ kernel value between two points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("shape mismatch")
    d2 = float(np.sum((x - y) ** 2))
    return float(sum((s * cfg.base) / (s * cfg.base + d2) for s in cfg.scales))


def _pairwise_sq_dists(X, Y):
    x2 = ad.sum_(ad.square(X), axis=1, keepdims=True)  # [n,1]
    y2 = ad.reshape(ad.sum_(ad.square(Y), axis=1), (1, -1))  # [1,m]
    xy = ad.matmul(X, ad.transpose2d(Y))
    d2 = ad.add(ad.sub(x2, ad.mul(xy, 2.0)), y2)
    return ad.relu(d2)  # clamp tiny negative float error


def _kernel_matrix_sum(X, Y, cfg: KernelConfig, skip_diag: bool):
    d2 = _pairwise_sq_dists(X, Y)
    n = ad.value_of(X).shape[0]
    total = None
    for s in cfg.scales:
        c = s * cfg.base
        term = ad.sum_(ad.div(c, ad.add(d2, c)))
        total = term if total is None else ad.add(total, term)
    if skip_diag:
        # k(x, x) = len(scales) exactly; remove the diagonal contribution
        total = ad.sub(total, float(n * len(cfg.scales)))
    return total


def mmd_unbiased(X, Y, cfg: KernelConfig):
    """Unbiased two-sample U-statistic of the mixture-IMQ MMD; may be negative."""
    Xv, Yv = ad.value_of(X), ad.value_of(Y)
    n, m = Xv.shape[0], Yv.shape[0]
    if n < 2 or m < 2:
        raise ValueError("mmd_unbiased needs at least two samples per side")
    kxx = _kernel_matrix_sum(X, X, cfg, skip_diag=True)
    kyy = _kernel_matrix_sum(Y, Y, cfg, skip_diag=True)
    kxy = _kernel_matrix_sum(X, Y, cfg, skip_diag=False)
    out = ad.add(
        ad.add(ad.mul(kxx, 1.0 / (n * (n - 1))), ad.mul(kyy, 1.0 / (m * (m - 1)))),
        ad.mul(kxy, -2.0 / (n * m)),
    )
    return float(ad.value_of(out)) if not ad.is_var(out) else out
