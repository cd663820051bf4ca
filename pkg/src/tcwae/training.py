"""Differentiable loss evaluation and the (optionally adversarial) train loop.

One iteration of a non-adversarial objective consumes one minibatch; the
GAN-family objectives draw two disjoint minibatches per iteration, one for
the autoencoder update (discriminator frozen) and one for the discriminator
update (codes detached from the encoder graph). Everything is driven by
named RNG streams derived from the run seed, so a (config, seed) pair fully
determines every logged number and checkpoint byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional

import numpy as np

from . import autodiff as ad
from . import objectives as obj
from .estimators import KernelConfig, default_kernel_config, permute_dims
from .gaussians import DiagonalGaussian, standard_prior
from .networks import (
    ModelSpecs,
    decoder_forward,
    discriminator_forward,
    encoder_head,
    init_params,
    network_forward,
)
from .optim import DISC_ADAM, AdamConfig, AdamState, adam_init, adam_step
from .rng import (
    STREAM_DATA,
    STREAM_INIT,
    STREAM_NOISE,
    STREAM_PERMUTE,
    STREAM_PRIOR,
    RngState,
)

OBJECTIVES = ("tcwae_mws", "tcwae_gan", "beta_tcvae", "factor_vae", "wae_mmd", "elbo")
GAN_OBJECTIVES = ("tcwae_gan", "factor_vae")
DETERMINISTIC_DECODER = ("tcwae_mws", "tcwae_gan", "wae_mmd")


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str
    hyper: obj.HyperParams
    dataset_size: int
    kernel: Optional[KernelConfig] = None

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}")


@dataclass(frozen=True)
class TrainConfig:
    objective: str
    hyper: obj.HyperParams
    batch_size: int
    iterations: int
    latent_dim: int
    seed: int
    adam: AdamConfig = AdamConfig()
    disc_adam: AdamConfig = DISC_ADAM
    dataset_size: Optional[int] = None  # N used by the MWS terms; defaults to the dataset size
    checkpoint_every: int = 0  # 0 = final checkpoint only
    dtype: str = "f32"
    reduced_disc: bool = False

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iteration count must be >= 1")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.dtype not in ("f32", "f64"):
            raise ValueError("dtype must be f32 or f64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "f32" else np.float64


@dataclass
class TrainingRun:
    config: TrainConfig
    specs: ModelSpecs
    params: Dict[str, Dict[str, np.ndarray]]
    loss_log: list  # one dict per iteration
    final_prior: DiagonalGaussian


def _lift(params: Dict[str, np.ndarray], as_vars: bool):
    if as_vars:
        return {k: ad.Var(v) for k, v in params.items()}
    return params


def _reparam_codes(means, log_vars, eps):
    return ad.add(means, ad.mul(ad.exp(ad.mul(log_vars, 0.5)), eps))


def _collect_grads(lifted: Dict[str, Dict[str, "ad.Var"]]) -> Dict[str, np.ndarray]:
    grads = {}
    for group, tensors in lifted.items():
        for name, var in tensors.items():
            if isinstance(var, ad.Var):
                g = var.grad
                grads[f"{group}/{name}"] = np.zeros_like(var.value) if g is None else g
    return grads


def _check_finite(terms: dict) -> None:
    for name, value in terms.items():
        if not np.all(np.isfinite(ad.value_of(value))):
            raise FloatingPointError(f"non-finite loss term: {name}")


def loss_and_gradients(
    cfg: ObjectiveConfig,
    specs: ModelSpecs,
    params: Dict[str, Dict[str, np.ndarray]],
    images: np.ndarray,
    noise_rng: RngState,
    prior_rng: Optional[RngState] = None,
    wrt=("encoder", "decoder", "discriminator"),
):
    """Objective value and exact gradients for the requested parameter groups.

    Returns (LossBreakdown, gradient map keyed "group/name"). Pathwise
    gradients flow through the reparameterized codes; for GAN objectives the
    discriminator's logits are part of the graph, so its parameters receive
    gradients as well when requested.
    """
    lifted = {
        group: _lift(tensors, group in wrt)
        for group, tensors in params.items()
        if tensors is not None
    }
    d = specs.encoder.latent_dim
    prior = standard_prior(d)
    means, log_vars = encoder_head(network_forward(specs.encoder, lifted["encoder"], images))
    eps = noise_rng.normal(ad.value_of(means).shape, dtype=images.dtype)
    codes = _reparam_codes(means, log_vars, eps)
    hp = cfg.hyper

    if cfg.kind == "tcwae_mws":
        x_hat = decoder_forward(specs.decoder, lifted["decoder"], codes, deterministic=True)
        terms = obj.tcwae_mws_terms(images, x_hat, codes, means, log_vars, hp, cfg.dataset_size, prior)
    elif cfg.kind == "tcwae_gan":
        x_hat = decoder_forward(specs.decoder, lifted["decoder"], codes, deterministic=True)
        logits = discriminator_forward(specs.discriminator, lifted["discriminator"], codes)
        terms = obj.tcwae_gan_terms(images, x_hat, codes, means, log_vars, logits, hp, cfg.dataset_size, prior)
    elif cfg.kind == "beta_tcvae":
        x_logits = decoder_forward(specs.decoder, lifted["decoder"], codes, deterministic=False)
        terms = obj.beta_tcvae_terms(images, x_logits, codes, means, log_vars, hp, cfg.dataset_size, prior)
    elif cfg.kind == "factor_vae":
        x_logits = decoder_forward(specs.decoder, lifted["decoder"], codes, deterministic=False)
        logits = discriminator_forward(specs.discriminator, lifted["discriminator"], codes)
        terms = obj.factor_vae_terms(images, x_logits, means, log_vars, logits, hp.gamma)
    elif cfg.kind == "elbo":
        x_logits = decoder_forward(specs.decoder, lifted["decoder"], codes, deterministic=False)
        terms = obj.factor_vae_terms(images, x_logits, means, log_vars, None, 0.0)
    elif cfg.kind == "wae_mmd":
        x_hat = decoder_forward(specs.decoder, lifted["decoder"], codes, deterministic=True)
        if prior_rng is None:
            raise ValueError("wae_mmd needs a prior sample stream")
        prior_samples = prior_rng.normal(ad.value_of(codes).shape, dtype=images.dtype)
        kernel = cfg.kernel or default_kernel_config(d)
        terms = obj.wae_mmd_terms(images, x_hat, codes, prior_samples, hp.lambda_, kernel)
    else:  # pragma: no cover
        raise ValueError(cfg.kind)

    _check_finite(terms)
    total = terms["total"]
    if ad.is_var(total):
        total.backward()
    breakdown = obj.LossBreakdown(**{k: float(ad.value_of(v)) for k, v in terms.items()})
    return breakdown, _collect_grads(lifted)


def disc_loss_and_gradients(
    specs: ModelSpecs,
    disc_params: Dict[str, np.ndarray],
    codes: np.ndarray,
    perm_rng: RngState,
    wrt: bool = True,
):
    """Discriminator cross-entropy on (codes, permuted codes) and its gradients."""
    lifted = _lift(disc_params, wrt)
    perm = permute_dims(codes, perm_rng).astype(codes.dtype, copy=False)
    logits_q = discriminator_forward(specs.discriminator, lifted, codes)
    logits_p = discriminator_forward(specs.discriminator, lifted, perm)
    loss = obj.discriminator_loss(logits_q, logits_p)
    if ad.is_var(loss):
        loss.backward()
    grads = {name: (var.grad if var.grad is not None else np.zeros_like(var.value)) for name, var in lifted.items()} if wrt else {}
    return float(ad.value_of(loss)), grads


def encode_numeric(specs: ModelSpecs, enc_params, images) -> DiagonalGaussian:
    means, log_vars = encoder_head(network_forward(specs.encoder, enc_params, images))
    return DiagonalGaussian(means, log_vars)


@dataclass(frozen=True)
class ModelHandle:
    """Deterministic evaluation interface: encode to posterior means, decode means.

    Decoding applies the final sigmoid for both decoder families (it is the
    pixel mean of the Bernoulli decoders and the deterministic output of the
    WAE decoders). Encoding is chunked to bound im2col buffer memory.
    """

    specs: ModelSpecs
    params: Dict[str, Dict[str, np.ndarray]]
    chunk: int = 256

    def encode_mean(self, images) -> np.ndarray:
        outs = []
        for start in range(0, images.shape[0], self.chunk):
            x = np.asarray(images[start : start + self.chunk], dtype=np.float64)
            means, _ = encoder_head(network_forward(self.specs.encoder, self.params["encoder"], x))
            outs.append(means)
        return np.concatenate(outs, axis=0)

    def encode_posteriors(self, images) -> DiagonalGaussian:
        means, log_vars = [], []
        for start in range(0, images.shape[0], self.chunk):
            x = np.asarray(images[start : start + self.chunk], dtype=np.float64)
            m, lv = encoder_head(network_forward(self.specs.encoder, self.params["encoder"], x))
            means.append(m)
            log_vars.append(lv)
        return DiagonalGaussian(np.concatenate(means), np.concatenate(log_vars))

    def decode_mean(self, codes) -> np.ndarray:
        outs = []
        for start in range(0, codes.shape[0], self.chunk):
            z = np.asarray(codes[start : start + self.chunk], dtype=np.float64)
            outs.append(decoder_forward(self.specs.decoder, self.params["decoder"], z, deterministic=True))
        return np.concatenate(outs, axis=0)


def train(
    cfg: TrainConfig,
    dataset,
    specs: Optional[ModelSpecs] = None,
    checkpoint_sink: Optional[Callable[[int, Dict[str, Dict[str, np.ndarray]]], None]] = None,
) -> TrainingRun:
    """Optimize one model on one dataset; bit-reproducible given (cfg, dataset)."""
    from .networks import model_specs  # local import to keep module load light

    is_gan = cfg.objective in GAN_OBJECTIVES
    if is_gan and dataset.size < 2 * cfg.batch_size:
        raise ValueError("dataset smaller than 2x batch for adversarial objectives")
    if specs is None:
        specs = model_specs(dataset.resolution, dataset.channels, cfg.latent_dim, reduced_disc=cfg.reduced_disc)

    dtype = cfg.np_dtype
    rng_init = RngState(cfg.seed, STREAM_INIT)
    rng_data = RngState(cfg.seed, STREAM_DATA)
    rng_noise = RngState(cfg.seed, STREAM_NOISE)
    rng_perm = RngState(cfg.seed, STREAM_PERMUTE)
    rng_prior = RngState(cfg.seed, STREAM_PRIOR)

    params: Dict[str, Dict[str, np.ndarray]] = {
        "encoder": init_params(specs.encoder, rng_init, dtype=dtype),
        "decoder": init_params(specs.decoder, rng_init, dtype=dtype),
    }
    if is_gan:
        params["discriminator"] = init_params(specs.discriminator, rng_init, dtype=dtype)

    model_keys = [k for k in ("encoder", "decoder")]
    flat_model = {f"{g}/{n}": p for g in model_keys for n, p in params[g].items()}
    model_state = adam_init(flat_model)
    disc_state = adam_init(params["discriminator"]) if is_gan else None

    n_total = cfg.dataset_size or dataset.size
    obj_cfg = ObjectiveConfig(cfg.objective, cfg.hyper, n_total)
    images_all = dataset.images.astype(dtype, copy=False)
    loss_log = []

    for it in range(1, cfg.iterations + 1):
        if is_gan:
            idx = rng_data.permutation(dataset.size)[: 2 * cfg.batch_size]
            idx_model, idx_disc = idx[: cfg.batch_size], idx[cfg.batch_size :]
        else:
            idx_model = rng_data.integers(0, dataset.size, size=cfg.batch_size)
            idx_disc = None

        batch = images_all[idx_model]
        breakdown, grads = loss_and_gradients(
            obj_cfg, specs, params, batch, rng_noise, rng_prior, wrt=("encoder", "decoder")
        )
        flat_model = {f"{g}/{n}": p for g in model_keys for n, p in params[g].items()}
        flat_model, model_state = adam_step(flat_model, grads, model_state, cfg.adam)
        for g in model_keys:
            params[g] = {n: flat_model[f"{g}/{n}"] for n in params[g]}

        disc_loss = 0.0
        if is_gan:
            disc_batch = images_all[idx_disc]
            post = encode_numeric(specs, params["encoder"], disc_batch)
            eps = rng_noise.normal(post.mean.shape, dtype=dtype)
            codes = (post.mean + np.exp(0.5 * post.log_var) * eps).astype(dtype, copy=False)
            disc_loss, disc_grads = disc_loss_and_gradients(specs, params["discriminator"], codes, rng_perm)
            params["discriminator"], disc_state = adam_step(params["discriminator"], disc_grads, disc_state, cfg.disc_adam)

        loss_log.append(
            {
                "iter": it,
                "reconstruction": breakdown.reconstruction,
                "tc": breakdown.tc,
                "dimwise_kl": breakdown.dimwise_kl,
                "index_code_mi": breakdown.index_code_mi,
                "total": breakdown.total,
                "disc_loss": disc_loss,
            }
        )
        if checkpoint_sink is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
            checkpoint_sink(it, params)

    return TrainingRun(cfg, specs, params, loss_log, standard_prior(cfg.latent_dim))
