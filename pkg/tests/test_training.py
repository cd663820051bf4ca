import hashlib

import numpy as np
import pytest

from tcwae.datasets import FactorSpec, generate_sprites
from tcwae.gaussians import standard_prior
from tcwae.networks import init_params, model_specs
from tcwae.objectives import HyperParams
from tcwae.rng import STREAM_NOISE, STREAM_PRIOR, RngState
from tcwae.training import (
    ModelHandle,
    ObjectiveConfig,
    TrainConfig,
    disc_loss_and_gradients,
    loss_and_gradients,
    train,
)


def tiny_dataset(seed=0, res=8):
    return generate_sprites(FactorSpec(("shape", "pos_x", "pos_y"), (2, 3, 3)), res, seed)


def tiny_setup(seed=0, latent=2, with_disc=False):
    specs = model_specs(8, 1, latent, reduced_disc=True)
    rng = RngState(seed, 1)
    params = {
        "encoder": init_params(specs.encoder, rng),
        "decoder": init_params(specs.decoder, rng),
    }
    if with_disc:
        params["discriminator"] = init_params(specs.discriminator, rng)
    return specs, params


def params_digest(params):
    h = hashlib.sha256()
    for g in sorted(params):
        for name in sorted(params[g]):
            h.update(np.ascontiguousarray(params[g][name], dtype="<f8").tobytes())
    return h.hexdigest()


class TestLossAndGradients:
    def test_decoder_bias_matches_finite_differences(self):
        specs, params = tiny_setup()
        images = RngState(2, 2).uniform((4, 8, 8, 1))
        cfg = ObjectiveConfig("tcwae_mws", HyperParams(beta=0.0, gamma=0.0), 32)
        _, grads = loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE))
        key = "decoder/b3"
        an = grads[key]
        h = 1e-5
        fd = np.zeros_like(an)
        flat = params["decoder"]["b3"].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE), wrt=())
            flat[i] = orig - h
            down, _ = loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE), wrt=())
            flat[i] = orig
            fd.reshape(-1)[i] = (up.total - down.total) / (2 * h)
        np.testing.assert_allclose(an, fd, rtol=1e-4, atol=1e-8)

    def test_zero_weights_kill_encoder_gradients(self):
        specs, params = tiny_setup()
        params = {g: {k: np.zeros_like(v) for k, v in group.items()} for g, group in params.items()}
        images = RngState(3, 2).uniform((4, 8, 8, 1))
        cfg = ObjectiveConfig("tcwae_mws", HyperParams(beta=0.0, gamma=0.0), 32)
        _, grads = loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE))
        enc_norm = sum(np.abs(g).sum() for k, g in grads.items() if k.startswith("encoder"))
        dec_norm = sum(np.abs(g).sum() for k, g in grads.items() if k.startswith("decoder"))
        assert enc_norm == pytest.approx(0.0, abs=1e-12)
        assert dec_norm > 0.0

    def test_doubling_beta_doubles_tc_gradient_component(self):
        specs, params = tiny_setup(seed=5)
        images = RngState(6, 2).uniform((6, 8, 8, 1))

        def grads_at(beta):
            cfg = ObjectiveConfig("tcwae_mws", HyperParams(beta=beta, gamma=0.7), 32)
            _, g = loss_and_gradients(cfg, specs, params, images, RngState(1, STREAM_NOISE))
            return g

        g0, g1, g2 = grads_at(0.0), grads_at(1.0), grads_at(2.0)
        for key in g0:
            np.testing.assert_allclose(g2[key] - g1[key], g1[key] - g0[key], rtol=1e-6, atol=1e-10)

    def test_gradient_keys_match_parameter_keys(self):
        specs, params = tiny_setup(with_disc=True)
        images = RngState(7, 2).uniform((4, 8, 8, 1))
        cfg = ObjectiveConfig("tcwae_gan", HyperParams(), 32)
        _, grads = loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE))
        expected = {f"{g}/{k}" for g in params for k in params[g]}
        assert set(grads) == expected

    def test_nonfinite_loss_names_term(self):
        specs, params = tiny_setup()
        params["encoder"] = {k: np.full_like(v, 1e200) for k, v in params["encoder"].items()}
        images = RngState(8, 2).uniform((4, 8, 8, 1))
        cfg = ObjectiveConfig("tcwae_mws", HyperParams(beta=1.0, gamma=1.0), 32)
        with pytest.raises(FloatingPointError, match="non-finite loss term"):
            loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE), RngState(0, STREAM_PRIOR))


class TestTrainLoop:
    def test_log_length_matches_iterations(self):
        ds = tiny_dataset()
        cfg = TrainConfig("tcwae_mws", HyperParams(beta=1, gamma=1), batch_size=4, iterations=1, latent_dim=2, seed=0, dtype="f64")
        run = train(cfg, ds)
        assert len(run.loss_log) == 1
        with pytest.raises(ValueError):
            TrainConfig("tcwae_mws", HyperParams(), batch_size=4, iterations=0, latent_dim=2, seed=0)

    def test_determinism_bitwise(self):
        ds = tiny_dataset()
        cfg = TrainConfig("beta_tcvae", HyperParams(alpha=1, beta=2, gamma=1), batch_size=4, iterations=6, latent_dim=2, seed=3, dtype="f32")
        a = train(cfg, ds)
        b = train(cfg, ds)
        assert a.loss_log == b.loss_log
        assert params_digest(a.params) == params_digest(b.params)

    def test_gan_objective_runs_and_logs_disc_loss(self):
        ds = tiny_dataset()
        cfg = TrainConfig("factor_vae", HyperParams(gamma=2.0), batch_size=4, iterations=3, latent_dim=2, seed=0, dtype="f64", reduced_disc=True)
        run = train(cfg, ds)
        assert all(np.isfinite(row["disc_loss"]) and row["disc_loss"] > 0 for row in run.loss_log)

    def test_gan_needs_double_batch(self):
        ds = tiny_dataset()
        cfg = TrainConfig("tcwae_gan", HyperParams(), batch_size=10, iterations=1, latent_dim=2, seed=0, reduced_disc=True)
        with pytest.raises(ValueError, match="2x batch"):
            train(cfg, ds)

    def test_adversarial_updates_are_isolated(self):
        ds = tiny_dataset()
        specs, params = tiny_setup(with_disc=True)
        images = ds.images[:4].astype(np.float64)
        cfg = ObjectiveConfig("tcwae_gan", HyperParams(beta=1, gamma=1), 18)

        # autoencoder update must not touch discriminator tensors
        disc_before = params_digest({"d": params["discriminator"]})
        _, grads = loss_and_gradients(cfg, specs, params, images, RngState(0, STREAM_NOISE), wrt=("encoder", "decoder"))
        assert not any(k.startswith("discriminator") for k in grads)
        assert params_digest({"d": params["discriminator"]}) == disc_before

        # discriminator update sees detached codes: no encoder/decoder grads
        codes = RngState(2, 2).normal((6, 2))
        model_before = params_digest({"e": params["encoder"], "d": params["decoder"]})
        loss, disc_grads = disc_loss_and_gradients(specs, params["discriminator"], codes, RngState(3, 1))
        assert set(disc_grads) == set(params["discriminator"])
        assert params_digest({"e": params["encoder"], "d": params["decoder"]}) == model_before
        assert np.isfinite(loss)

    def test_wae_mmd_overfits_two_images(self):
        ds = tiny_dataset()
        images = ds.images[:2]
        factors = ds.factors[:2]
        from dataclasses import replace

        small = replace(ds, images=images, factors=factors)
        cfg = TrainConfig("wae_mmd", HyperParams(lambda_=1.0), batch_size=2, iterations=500, latent_dim=2, seed=1, dtype="f32")
        run = train(cfg, small)
        recon = np.array([row["reconstruction"] for row in run.loss_log])
        q = len(recon) // 5
        assert recon[-q:].mean() < recon[:q].mean()

    def test_every_objective_trains_one_step(self):
        ds = tiny_dataset()
        for objective in ("tcwae_mws", "tcwae_gan", "beta_tcvae", "factor_vae", "wae_mmd", "elbo"):
            cfg = TrainConfig(objective, HyperParams(beta=1, gamma=1, lambda_=1, alpha=1), batch_size=4, iterations=2, latent_dim=2, seed=0, dtype="f64", reduced_disc=True)
            run = train(cfg, tiny_dataset())
            assert len(run.loss_log) == 2
            assert all(np.isfinite(r["total"]) for r in run.loss_log)


class TestModelHandle:
    def test_encode_decode_shapes_and_chunking(self):
        specs, params = tiny_setup()
        handle = ModelHandle(specs, params, chunk=3)
        ds = tiny_dataset()
        means = handle.encode_mean(ds.images[:7])
        assert means.shape == (7, 2)
        out = handle.decode_mean(means)
        assert out.shape == (7, 8, 8, 1)
        post = handle.encode_posteriors(ds.images[:5])
        assert post.mean.shape == (5, 2)

    def test_chunking_matches_single_pass(self):
        specs, params = tiny_setup()
        ds = tiny_dataset()
        a = ModelHandle(specs, params, chunk=2).encode_mean(ds.images[:6])
        b = ModelHandle(specs, params, chunk=64).encode_mean(ds.images[:6])
        np.testing.assert_allclose(a, b, atol=1e-12)
