"""Finite-difference verification of every objective's analytic gradients.

Runs on reduced 8x8 specs at f64 (full specs would make central differences
infeasible) and reports the worst relative error per parameter block. The
finite-difference side is computed from plain loss evaluations and shares no
gradient code with the tape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .datasets import FactorSpec, generate_sprites
from .networks import ModelSpecs, decoder_spec, encoder_spec, init_params, reduced_discriminator_spec
from .objectives import HyperParams
from .rng import STREAM_INIT, STREAM_NOISE, STREAM_PRIOR, RngState
from .training import (
    GAN_OBJECTIVES,
    OBJECTIVES,
    ObjectiveConfig,
    disc_loss_and_gradients,
    encode_numeric,
    loss_and_gradients,
)

DEFAULT_TOLERANCE = 1e-4
FD_STEP = 1e-4


@dataclass(frozen=True)
class BlockReport:
    objective: str
    loss: str  # which loss the block was checked under
    block: str  # "group/name"
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def _reduced_setup(seed: int, latent_dim: int = 2, batch_size: int = 4):
    specs = ModelSpecs(
        encoder=encoder_spec(8, 1, latent_dim),
        decoder=decoder_spec(8, 1, latent_dim),
        discriminator=reduced_discriminator_spec(latent_dim),
    )
    rng = RngState(seed, STREAM_INIT)
    params = {
        "encoder": init_params(specs.encoder, rng, dtype=np.float64),
        "decoder": init_params(specs.decoder, rng, dtype=np.float64),
        "discriminator": init_params(specs.discriminator, rng, dtype=np.float64),
    }
    # Dense inputs and off-zero biases keep ReLU kinks away from the
    # finite-difference interval: a parameter step of h shifts preactivations
    # by O(h * activations), so every pre-ReLU value must clear a margin or a
    # central difference straddles the kink. Re-jitter biases until clean.
    images = RngState(seed, 12).uniform((batch_size, 8, 8, 1))
    base_biases = {g: {n: t for n, t in group.items() if n.startswith("b")} for g, group in params.items()}
    margin = 2e-3
    for attempt in range(50):
        jitter = RngState(seed, 100 + attempt)
        for g, group in params.items():
            for n in base_biases[g]:
                group[n] = base_biases[g][n] + jitter.uniform(group[n].shape, -0.2, 0.2)
        if _min_kink_distance(specs, params, images, seed) > margin:
            break
    else:  # pragma: no cover
        raise RuntimeError("could not condition the gradcheck harness away from ReLU kinks")
    return specs, params, images


def _min_kink_distance(specs, params, images, seed) -> float:
    """Smallest |pre-ReLU activation| over every network the checks will run."""
    from . import autodiff as ad
    from .networks import encoder_head, network_forward
    from .estimators import permute_dims

    trace: list = []
    raw = network_forward(specs.encoder, params["encoder"], images, trace=trace)
    means, log_vars = encoder_head(raw)
    eps = RngState(seed, STREAM_NOISE).normal(means.shape)
    codes = means + np.exp(0.5 * log_vars) * eps
    network_forward(specs.decoder, params["decoder"], codes, trace=trace)
    network_forward(specs.discriminator, params["discriminator"], codes, trace=trace)
    network_forward(specs.discriminator, params["discriminator"], permute_dims(codes, RngState(seed, 7)), trace=trace)
    return min(float(np.min(np.abs(t))) for t in trace)


def _block_errors(analytic, numeric_fn, params, groups, h, corrupt=None):
    """Central differences for every element of every block in ``groups``."""
    reports = {}
    for group in groups:
        for name, tensor in params[group].items():
            key = f"{group}/{name}"
            an = analytic[key].copy()
            if corrupt == key:
                an = an + 1e-2
            fd = np.zeros_like(tensor)
            flat = tensor.reshape(-1)
            fd_flat = fd.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = numeric_fn()
                flat[i] = orig - h
                down = numeric_fn()
                flat[i] = orig
                fd_flat[i] = (up - down) / (2.0 * h)
            scale = max(np.max(np.abs(an)), np.max(np.abs(fd)), 1e-8)
            reports[key] = float(np.max(np.abs(an - fd)) / scale)
    return reports


def finite_difference_report(
    objectives=OBJECTIVES,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    h: float = FD_STEP,
    corrupt: Optional[str] = None,
) -> List[BlockReport]:
    """Check every objective x parameter block; failures are report entries."""
    reports: List[BlockReport] = []
    for objective in objectives:
        specs, params, images = _reduced_setup(seed)
        total_params = sum(p.size for g in params.values() for p in g.values())
        if total_params >= 10_000:
            raise ValueError("reduced spec exceeded the 10k-parameter budget")
        hyper = HyperParams(beta=1.7, gamma=0.9, lambda_=1.3, alpha=0.8)
        cfg = ObjectiveConfig(objective, hyper, dataset_size=64)
        is_gan = objective in GAN_OBJECTIVES

        def model_loss():
            bd, _ = loss_and_gradients(
                cfg, specs, params, images, RngState(seed, STREAM_NOISE), RngState(seed, STREAM_PRIOR), wrt=()
            )
            return bd.total

        _, analytic = loss_and_gradients(
            cfg, specs, params, images, RngState(seed, STREAM_NOISE), RngState(seed, STREAM_PRIOR)
        )
        errs = _block_errors(analytic, model_loss, params, ("encoder", "decoder"), h, corrupt)
        for key, err in errs.items():
            reports.append(BlockReport(objective, "model", key, err, tolerance))

        if is_gan:
            post = encode_numeric(specs, params["encoder"], images)
            eps = RngState(seed, STREAM_NOISE).normal(post.mean.shape)
            codes = post.mean + np.exp(0.5 * post.log_var) * eps

            def disc_loss():
                loss, _ = disc_loss_and_gradients(specs, params["discriminator"], codes, RngState(seed, 7), wrt=False)
                return loss

            _, disc_grads = disc_loss_and_gradients(specs, params["discriminator"], codes, RngState(seed, 7))
            disc_grads = {f"discriminator/{k}": v for k, v in disc_grads.items()}
            errs = _block_errors(disc_grads, disc_loss, params, ("discriminator",), h, corrupt)
            for key, err in errs.items():
                reports.append(BlockReport(objective, "discriminator", key, err, tolerance))

        if objective == "beta_tcvae":
            # the index-code mutual-information term alone, against the encoder
            from . import autodiff as ad
            from .networks import encoder_head, network_forward
            from .objectives import mws_decomposition_terms
            from .gaussians import standard_prior

            def icmi_value(lift: bool):
                enc = {k: ad.Var(v) for k, v in params["encoder"].items()} if lift else params["encoder"]
                means, log_vars = encoder_head(network_forward(specs.encoder, enc, images))
                eps = RngState(seed, STREAM_NOISE).normal(ad.value_of(means).shape)
                codes = ad.add(means, ad.mul(ad.exp(ad.mul(log_vars, 0.5)), eps))
                icmi, _, _ = mws_decomposition_terms(codes, means, log_vars, standard_prior(specs.encoder.latent_dim))
                return icmi, enc

            icmi, lifted = icmi_value(lift=True)
            icmi.backward()
            analytic_icmi = {
                f"encoder/{k}": (v.grad if v.grad is not None else np.zeros_like(v.value))
                for k, v in lifted.items()
            }
            errs = _block_errors(
                analytic_icmi, lambda: float(ad.value_of(icmi_value(lift=False)[0])), params, ("encoder",), h, corrupt
            )
            for key, err in errs.items():
                reports.append(BlockReport(objective, "index_code_mi", key, err, tolerance))
    return reports


def format_report(reports: List[BlockReport]) -> str:
    lines = []
    for r in reports:
        status = "ok" if r.passed else "FAIL"
        lines.append(f"{status:4s} {r.objective:11s} {r.loss:14s} {r.block:18s} max_rel_err={r.max_rel_err:.3e}")
    n_fail = sum(not r.passed for r in reports)
    lines.append(f"{len(reports)} blocks checked, {n_fail} failures")
    return "\n".join(lines)
