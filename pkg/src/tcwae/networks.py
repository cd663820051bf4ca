"""Encoder / decoder / discriminator networks.

Architectures are data: a ``NetworkSpec`` is a list of layer descriptors
interpreted by one forward function that accepts either plain arrays or
autodiff Vars for the parameters. The full 64x64 architecture (4x4 convs,
stride 2) is what real runs train; reduced 8x8/16x16 variants with
proportionally fewer channels exist for finite-difference checks, which
would be infeasible at full size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from . import autodiff as ad
from .gaussians import LOG_VAR_MAX, LOG_VAR_MIN, DiagonalGaussian
from .kernels import conv_out_size
from .rng import RngState


@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int = 4
    stride: int = 2
    pad: int = 1
    relu: bool = True


@dataclass(frozen=True)
class ConvT:
    out_channels: int
    kernel: int = 4
    stride: int = 2
    pad: int = 1
    relu: bool = True


@dataclass(frozen=True)
class Dense:
    width: int
    relu: bool = True


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Reshape:
    shape: Tuple[int, int, int]


Layer = Union[Conv, ConvT, Dense, Flatten, Reshape]


@dataclass(frozen=True)
class NetworkSpec:
    kind: str  # encoder | decoder | discriminator
    input_shape: Tuple[int, ...]  # (H, W, C) for images, (d,) for codes
    latent_dim: int
    layers: Tuple[Layer, ...]

    def __post_init__(self):
        if self.kind not in ("encoder", "decoder", "discriminator"):
            raise ValueError(f"unknown network kind {self.kind!r}")
        final = self.layers[-1]
        if self.kind == "encoder":
            if not isinstance(final, Dense) or final.width != 2 * self.latent_dim or final.relu:
                raise ValueError("encoder must end in a linear layer of width 2 * latent_dim")
        if self.kind == "discriminator":
            if not isinstance(final, Dense) or final.width != 2 or final.relu:
                raise ValueError("discriminator must end in a linear layer of width 2")

    def output_shape(self) -> Tuple[int, ...]:
        shape = self.input_shape
        for layer in self.layers:
            shape = _propagate(shape, layer)
        return shape


def _propagate(shape, layer) -> Tuple[int, ...]:
    if isinstance(layer, Conv):
        h, w, _ = shape
        return (
            conv_out_size(h, layer.kernel, layer.stride, layer.pad),
            conv_out_size(w, layer.kernel, layer.stride, layer.pad),
            layer.out_channels,
        )
    if isinstance(layer, ConvT):
        h, w, _ = shape
        scale = layer.stride
        return (
            (h - 1) * scale + layer.kernel - 2 * layer.pad,
            (w - 1) * scale + layer.kernel - 2 * layer.pad,
            layer.out_channels,
        )
    if isinstance(layer, Dense):
        return (layer.width,)
    if isinstance(layer, Flatten):
        return (int(np.prod(shape)),)
    if isinstance(layer, Reshape):
        return layer.shape
    raise TypeError(layer)


# ---------------------------------------------------------------------------
# spec builders
# ---------------------------------------------------------------------------

_CONV_CHANNELS = {64: (32, 32, 64, 64), 16: (8, 16), 8: (8,)}
_FC_WIDTH = {64: 256, 16: 32, 8: 16}


def encoder_spec(resolution: int, channels: int, latent_dim: int) -> NetworkSpec:
    convs = _CONV_CHANNELS[resolution]
    fc = _FC_WIDTH[resolution]
    layers = [Conv(c) for c in convs]
    layers += [Flatten(), Dense(fc), Dense(2 * latent_dim, relu=False)]
    return NetworkSpec("encoder", (resolution, resolution, channels), latent_dim, tuple(layers))


def decoder_spec(resolution: int, channels: int, latent_dim: int) -> NetworkSpec:
    convs = _CONV_CHANNELS[resolution]
    fc = _FC_WIDTH[resolution]
    base = resolution // (2 ** len(convs))
    deconv_channels = tuple(reversed(convs))[1:] + (channels,)
    layers = [Dense(fc), Dense(base * base * convs[-1]), Reshape((base, base, convs[-1]))]
    layers += [ConvT(c) for c in deconv_channels[:-1]]
    layers += [ConvT(deconv_channels[-1], relu=False)]
    return NetworkSpec("decoder", (latent_dim,), latent_dim, tuple(layers))


def discriminator_spec(latent_dim: int, widths: Tuple[int, ...] = (1000,) * 6) -> NetworkSpec:
    layers = [Dense(w) for w in widths] + [Dense(2, relu=False)]
    return NetworkSpec("discriminator", (latent_dim,), latent_dim, tuple(layers))


def reduced_discriminator_spec(latent_dim: int) -> NetworkSpec:
    return discriminator_spec(latent_dim, widths=(32, 32))


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _fan_in(shape_in, layer) -> int:
    if isinstance(layer, Conv):
        return layer.kernel * layer.kernel * shape_in[-1]
    if isinstance(layer, ConvT):
        # each output position receives ~ (k/stride)^2 contributions per channel
        return max(1, (layer.kernel // layer.stride) ** 2 * shape_in[-1])
    if isinstance(layer, Dense):
        return shape_in[0]
    raise TypeError(layer)


def init_params(spec: NetworkSpec, rng: RngState, dtype=np.float64) -> dict:
    """Fan-in-scaled uniform weights (std 1/sqrt(fan_in)), zero biases."""
    params: dict[str, np.ndarray] = {}
    shape = spec.input_shape
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            wshape = (layer.kernel, layer.kernel, shape[-1], layer.out_channels)
            bias_size = layer.out_channels
        elif isinstance(layer, ConvT):
            wshape = (layer.kernel, layer.kernel, layer.out_channels, shape[-1])
            bias_size = layer.out_channels
        elif isinstance(layer, Dense):
            wshape = (shape[0], layer.width)
            bias_size = layer.width
        else:
            shape = _propagate(shape, layer)
            continue
        bound = np.sqrt(3.0 / _fan_in(shape, layer))
        params[f"w{i}"] = rng.uniform(wshape, -bound, bound, dtype=dtype)
        params[f"b{i}"] = np.zeros(bias_size, dtype=dtype)
        shape = _propagate(shape, layer)
    return params


# ---------------------------------------------------------------------------
# forward passes (params may hold ndarrays or autodiff Vars)
# ---------------------------------------------------------------------------


def network_forward(spec: NetworkSpec, params: dict, x, trace=None):
    """Run the layer stack; returns the final pre-activation output.

    ``trace``, when a list, collects the pre-ReLU activation values (used by
    the gradient-check harness to keep kinks out of the difference interval).
    """
    h = x
    shape = spec.input_shape
    batch = ad.value_of(x).shape[0]
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            hin, win, cin = shape
            k, s, p = layer.kernel, layer.stride, layer.pad
            ho, wo = conv_out_size(hin, k, s, p), conv_out_size(win, k, s, p)
            cols = ad.im2col(h, k, k, s, p)
            w2 = ad.reshape(params[f"w{i}"], (k * k * cin, layer.out_channels))
            h = ad.add(ad.matmul(cols, w2), params[f"b{i}"])
            h = ad.reshape(h, (batch, ho, wo, layer.out_channels))
        elif isinstance(layer, ConvT):
            hin, win, cin = shape
            k, s, p = layer.kernel, layer.stride, layer.pad
            ho, wo, co = _propagate(shape, layer)
            flat = ad.reshape(h, (batch * hin * win, cin))
            w2 = ad.reshape(params[f"w{i}"], (k * k * co, cin))
            cols = ad.matmul(flat, ad.transpose2d(w2))
            h = ad.col2im(cols, (batch, ho, wo, co), k, k, s, p)
            h = ad.add(h, params[f"b{i}"])
        elif isinstance(layer, Dense):
            h = ad.add(ad.matmul(h, params[f"w{i}"]), params[f"b{i}"])
        elif isinstance(layer, Flatten):
            h = ad.reshape(h, (batch, -1))
        elif isinstance(layer, Reshape):
            h = ad.reshape(h, (batch,) + layer.shape)
        if getattr(layer, "relu", False):
            if trace is not None:
                trace.append(ad.value_of(h))
            h = ad.relu(h)
        shape = _propagate(shape, layer)
    return h


def encoder_head(raw):
    """Split final 2*d activations into (mean, clamped log-variance)."""
    d = ad.value_of(raw).shape[1] // 2
    means = ad.take(raw, (slice(None), slice(0, d)))
    log_vars = ad.clip(ad.take(raw, (slice(None), slice(d, 2 * d))), LOG_VAR_MIN, LOG_VAR_MAX)
    return means, log_vars


def encoder_forward(spec: NetworkSpec, params: dict, images: np.ndarray) -> DiagonalGaussian:
    """Numeric encoder pass returning the batch of posteriors."""
    expect = (None,) + spec.input_shape
    got = np.asarray(images).shape
    if len(got) != 4 or got[1:] != spec.input_shape:
        raise ValueError(f"image batch shape {got} does not match spec {expect}")
    means, log_vars = encoder_head(network_forward(spec, params, images))
    return DiagonalGaussian(means, log_vars)


def decoder_forward(spec: NetworkSpec, params: dict, codes, deterministic: bool = True):
    """Decode codes to images: sigmoid pixels if deterministic, else logits."""
    got = ad.value_of(codes).shape
    if len(got) != 2 or got[1] != spec.latent_dim:
        raise ValueError(f"code batch shape {got} does not match latent dim {spec.latent_dim}")
    out = network_forward(spec, params, codes)
    return ad.sigmoid(out) if deterministic else out


def discriminator_forward(spec: NetworkSpec, params: dict, codes):
    got = ad.value_of(codes).shape
    if len(got) != 2 or got[1] != spec.latent_dim:
        raise ValueError(f"code batch shape {got} does not match latent dim {spec.latent_dim}")
    return network_forward(spec, params, codes)


@dataclass(frozen=True)
class ModelSpecs:
    """The network triple for one training run."""

    encoder: NetworkSpec
    decoder: NetworkSpec
    discriminator: NetworkSpec = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.decoder.output_shape() != self.encoder.input_shape:
            raise ValueError("decoder output shape must equal encoder input shape")


def model_specs(resolution: int, channels: int, latent_dim: int, reduced_disc: bool = False) -> ModelSpecs:
    disc = reduced_discriminator_spec(latent_dim) if reduced_disc else discriminator_spec(latent_dim)
    return ModelSpecs(
        encoder=encoder_spec(resolution, channels, latent_dim),
        decoder=decoder_spec(resolution, channels, latent_dim),
        discriminator=disc,
    )
