"""Per-minibatch losses with full per-term breakdowns.

Reduction convention everywhere: sum over pixels / latent dimensions, mean
over the batch, so hyperparameter weights transfer across batch sizes.

Weighting per objective (`total` is always the trained quantity):

* tcwae_mws / tcwae_gan: total = recon + beta * tc + gamma * dimwise_kl
* beta_tcvae: total = recon + alpha * index_code_mi + beta * tc + gamma * dimwise_kl
* factor_vae: total = recon + dimwise_kl + gamma * tc  (dimwise slot holds the
  closed-form per-datum KL, tc slot the density-ratio readout)
* wae_mmd: total = recon + dimwise_kl, where the dimwise slot carries the
  lambda-weighted MMD between codes and prior samples

The ``*_terms`` functions accept autodiff Vars (training path) or plain
arrays; the typed wrappers below them take the domain types and return
numeric breakdowns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .estimators import (
    KernelConfig,
    LatentBatch,
    density_ratio_kl,
    log_aggregate_and_dims,
    log_prior_dims,
    mmd_unbiased,
)
from .gaussians import DiagonalGaussian

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class HyperParams:
    """Objective weights; all finite and non-negative."""

    beta: float = 1.0
    gamma: float = 1.0
    lambda_: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("beta", "gamma", "lambda_", "alpha"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    reconstruction: float
    tc: float
    dimwise_kl: float
    index_code_mi: float
    total: float


def _scalar(x) -> float:
    return float(ad.value_of(x))


def _as_breakdown(terms: dict) -> LossBreakdown:
    return LossBreakdown(**{k: _scalar(v) for k, v in terms.items()})


def _per_datum_sum(x):
    b = ad.value_of(x).shape[0]
    return ad.sum_(ad.reshape(x, (b, -1)), axis=1)


def recon_cost_sq_euclid(x, x_hat):
    """Mean over the batch of the per-image squared Euclidean distance."""
    xv, xh = ad.value_of(x), ad.value_of(x_hat)
    if xv.shape != xh.shape:
        raise ValueError(f"shape mismatch {xv.shape} vs {xh.shape}")
    out = ad.mean(_per_datum_sum(ad.square(ad.sub(x, x_hat))))
    return out if ad.is_var(out) else float(out)


def recon_cost_bernoulli(x, logits):
    """Negative Bernoulli log-likelihood sum_pixels[softplus(l) - x*l], batch mean."""
    xv, lv = ad.value_of(x), ad.value_of(logits)
    if xv.shape != lv.shape:
        raise ValueError(f"shape mismatch {xv.shape} vs {lv.shape}")
    if np.min(xv) < 0.0 or np.max(xv) > 1.0:
        raise ValueError("targets must lie in [0, 1]")
    out = ad.mean(_per_datum_sum(ad.sub(ad.softplus(logits), ad.mul(x, logits))))
    return out if ad.is_var(out) else float(out)


# ---------------------------------------------------------------------------
# graph-capable cores
# ---------------------------------------------------------------------------


def mws_decomposition_terms(codes, means, log_vars, prior: DiagonalGaussian):
    """Centered MWS estimates: (index_code_mi, tc, dimwise_kl) batch means.

    index_code_mi + tc + dimwise_kl telescopes exactly to
    mean_i[log q(z_i|x_i) - log p(z_i)].
    """
    log_qhat, log_qhat_dims = log_aggregate_and_dims(codes, means, log_vars)
    log_p_dims = log_prior_dims(codes, prior)
    # own-posterior joint log density log q(z_i | x_i)
    diff = ad.sub(codes, means)
    own = ad.sum_(
        ad.sub(
            ad.mul(ad.add(log_vars, _LOG_2PI), -0.5),
            ad.mul(ad.mul(ad.square(diff), ad.exp(ad.mul(log_vars, -1.0))), 0.5),
        ),
        axis=1,
    )
    sum_qhat_dims = ad.sum_(log_qhat_dims, axis=1)
    icmi = ad.mean(ad.sub(own, log_qhat))
    tc = ad.mean(ad.sub(log_qhat, sum_qhat_dims))
    dimwise = ad.mean(ad.sub(sum_qhat_dims, ad.sum_(log_p_dims, axis=1)))
    return icmi, tc, dimwise


def closed_form_kl_terms(means, log_vars):
    """Batch mean of the closed-form KL(q(z|x) || N(0, I))."""
    per_dim = ad.mul(
        ad.sub(ad.add(ad.square(means), ad.exp(log_vars)), ad.add(log_vars, 1.0)),
        0.5,
    )
    return ad.mean(ad.sum_(per_dim, axis=1))


def tcwae_mws_terms(x, x_hat, codes, means, log_vars, hp: HyperParams, dataset_size: int, prior):
    recon = recon_cost_sq_euclid(x, x_hat)
    _, tc, dimwise = mws_decomposition_terms(codes, means, log_vars, prior)
    total = ad.add(recon, ad.add(ad.mul(tc, hp.beta), ad.mul(dimwise, hp.gamma)))
    return {
        "reconstruction": recon,
        "tc": tc,
        "dimwise_kl": dimwise,
        "index_code_mi": 0.0,
        "total": total,
    }


def tcwae_gan_terms(x, x_hat, codes, means, log_vars, disc_logits, hp: HyperParams, dataset_size: int, prior):
    recon = recon_cost_sq_euclid(x, x_hat)
    tc = density_ratio_kl(disc_logits)
    log_qhat_dims = log_aggregate_and_dims(codes, means, log_vars)[1]
    dimwise = ad.mean(ad.sum_(ad.sub(log_qhat_dims, log_prior_dims(codes, prior)), axis=1))
    total = ad.add(recon, ad.add(ad.mul(tc, hp.beta), ad.mul(dimwise, hp.gamma)))
    return {
        "reconstruction": recon,
        "tc": tc,
        "dimwise_kl": dimwise,
        "index_code_mi": 0.0,
        "total": total,
    }


def beta_tcvae_terms(x, decoder_logits, codes, means, log_vars, hp: HyperParams, dataset_size: int, prior):
    recon = recon_cost_bernoulli(x, decoder_logits)
    icmi, tc, dimwise = mws_decomposition_terms(codes, means, log_vars, prior)
    total = ad.add(
        recon,
        ad.add(
            ad.mul(icmi, hp.alpha),
            ad.add(ad.mul(tc, hp.beta), ad.mul(dimwise, hp.gamma)),
        ),
    )
    return {
        "reconstruction": recon,
        "tc": tc,
        "dimwise_kl": dimwise,
        "index_code_mi": icmi,
        "total": total,
    }


def factor_vae_terms(x, decoder_logits, means, log_vars, disc_logits, gamma: float):
    recon = recon_cost_bernoulli(x, decoder_logits)
    kl = closed_form_kl_terms(means, log_vars)
    tc = density_ratio_kl(disc_logits) if disc_logits is not None else 0.0
    total = ad.add(ad.add(recon, kl), ad.mul(tc, gamma))
    return {
        "reconstruction": recon,
        "tc": tc,
        "dimwise_kl": kl,
        "index_code_mi": 0.0,
        "total": total,
    }


def wae_mmd_terms(x, x_hat, codes, prior_samples, lambda_: float, cfg: KernelConfig):
    recon = recon_cost_sq_euclid(x, x_hat)
    mmd = ad.mul(mmd_unbiased(codes, prior_samples, cfg), lambda_)
    total = ad.add(recon, mmd)
    return {
        "reconstruction": recon,
        "tc": 0.0,
        "dimwise_kl": mmd,
        "index_code_mi": 0.0,
        "total": total,
    }


def discriminator_loss(logits_on_q, logits_on_perm):
    """Two-class softmax cross-entropy for the aggregate-vs-marginals classifier."""

    def _log_softmax_col(logits, col):
        return ad.sub(ad.take(logits, (slice(None), col)), ad.logsumexp(logits, axis=1))

    out = ad.mul(
        ad.add(
            ad.mean(_log_softmax_col(logits_on_q, 0)),
            ad.mean(_log_softmax_col(logits_on_perm, 1)),
        ),
        -0.5,
    )
    return out if ad.is_var(out) else float(out)


# ---------------------------------------------------------------------------
# numeric wrappers over the domain types
# ---------------------------------------------------------------------------


def tcwae_mws_loss(x, x_hat, batch: LatentBatch, hp: HyperParams, dataset_size: int, prior: DiagonalGaussian) -> LossBreakdown:
    return _as_breakdown(
        tcwae_mws_terms(
            x, x_hat, batch.codes, batch.posteriors.mean, batch.posteriors.log_var, hp, dataset_size, prior
        )
    )


def tcwae_gan_loss(x, x_hat, batch: LatentBatch, disc_logits, hp: HyperParams, dataset_size: int, prior: DiagonalGaussian) -> LossBreakdown:
    return _as_breakdown(
        tcwae_gan_terms(
            x, x_hat, batch.codes, batch.posteriors.mean, batch.posteriors.log_var, disc_logits, hp, dataset_size, prior
        )
    )


def beta_tcvae_loss(x, decoder_logits, batch: LatentBatch, hp: HyperParams, dataset_size: int, prior: DiagonalGaussian) -> LossBreakdown:
    return _as_breakdown(
        beta_tcvae_terms(
            x, decoder_logits, batch.codes, batch.posteriors.mean, batch.posteriors.log_var, hp, dataset_size, prior
        )
    )


def factor_vae_loss(x, decoder_logits, posterior: DiagonalGaussian, codes, disc_logits, gamma: float) -> LossBreakdown:
    del codes  # present for interface symmetry; the loss uses the posterior
    return _as_breakdown(
        factor_vae_terms(x, decoder_logits, posterior.mean, posterior.log_var, disc_logits, gamma)
    )


def wae_mmd_loss(x, x_hat, codes, prior_samples, lambda_: float, cfg: KernelConfig) -> LossBreakdown:
    return _as_breakdown(wae_mmd_terms(x, x_hat, codes, prior_samples, lambda_, cfg))
