"""View generators: noise transform, AE/DAE/VAE training, view stacks."""

import numpy as np
import pytest

from mage.augment import (
    AutoencoderConfig,
    DenoisingConfig,
    GaussianCorruption,
    LinearNoiseConfig,
    MaskingCorruption,
    VaeConfig,
    VaeModel,
    build_view_stack,
    linear_transform,
    reconstruct,
    reparameterize,
    train_autoencoder,
    train_dae,
    train_vae,
)
from mage.data import MinMaxScaler, generate_synthetic
from mage.errors import ConfigError, ShapeError, UsageError
from mage.gradcheck import finite_diff_grad_check
from mage.rng import Rng


def scaled_blob(n=200, dim=8, seed=0):
    raw = generate_synthetic(3, dim, n // 3 + 1, 4.0, Rng(seed)).vectors()[:n]
    scaler = MinMaxScaler.fit(raw)
    return raw, scaler.apply(raw), scaler


SMALL_AE = dict(latent_dim=3, hidden_dims=(6,), dropout_rate=0.2, epochs=30, batch_size=32)


class TestLinearTransform:
    def test_zero_noise_is_identity(self):
        x = Rng(0).normal((4, 6))
        out = linear_transform(x, LinearNoiseConfig(0.0, 0.0), Rng(1))
        np.testing.assert_array_equal(out, x)

    def test_degenerate_uniform_adds_constant(self):
        x = Rng(0).normal((3, 5))
        out = linear_transform(x, LinearNoiseConfig(0.25, 0.25), Rng(1))
        np.testing.assert_allclose(out - x, 0.25)

    def test_noise_respects_bounds(self):
        x = np.zeros((100, 100))  # 10^4 components
        out = linear_transform(x, LinearNoiseConfig(-0.05, 0.02), Rng(2))
        assert out.min() >= -0.05 and out.max() <= 0.02

    def test_sup_norm_bound(self):
        x = Rng(3).normal((50, 20))
        cfg = LinearNoiseConfig(-0.07, 0.04)
        out = linear_transform(x, cfg, Rng(4))
        assert np.abs(out - x).max() <= max(abs(cfg.r_min), abs(cfg.r_max))

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ConfigError):
            LinearNoiseConfig(0.1, -0.1)


class TestAutoencoderTraining:
    def test_loss_halves_on_synthetic_blob(self):
        _, scaled, scaler = scaled_blob()
        config = AutoencoderConfig(
            input_dim=8, latent_dim=6, hidden_dims=(12,), dropout_rate=0.2, epochs=30, batch_size=8
        )
        _, history = train_autoencoder(scaled, config, scaler, Rng(5))
        assert len(history) == 30
        assert history[-1] < 0.5 * history[0]

    def test_unscaled_input_rejected(self):
        raw, _, scaler = scaled_blob()
        config = AutoencoderConfig(input_dim=8, **SMALL_AE)
        with pytest.raises(UsageError, match="unscaled"):
            train_autoencoder(raw * 10, config, scaler, Rng(0))

    def test_zero_epochs_returns_initialization(self):
        _, scaled, scaler = scaled_blob(n=50)
        config = AutoencoderConfig(input_dim=8, **{**SMALL_AE, "epochs": 0})
        model, history = train_autoencoder(scaled, config, scaler, Rng(0))
        assert history == []
        assert model.net.params  # initialized but untrained

    def test_same_seed_reproduces_history(self):
        _, scaled, scaler = scaled_blob(n=60)
        config = AutoencoderConfig(input_dim=8, **{**SMALL_AE, "epochs": 5})
        _, h1 = train_autoencoder(scaled, config, scaler, Rng(21))
        _, h2 = train_autoencoder(scaled, config, scaler, Rng(21))
        assert h1 == h2

    def test_gradients_match_central_differences(self):
        rng = Rng(6)
        x = rng.child("x").uniform(0.05, 0.95, (5, 4))
        config = AutoencoderConfig(
            input_dim=4, latent_dim=2, hidden_dims=(3,), dropout_rate=0.3, epochs=1
        )
        from mage.augment import _autoencoder_specs
        from mage.layers import Mlp
        from mage.losses import mse_loss

        net = Mlp.init(_autoencoder_specs(config), rng.child("init"))

        def fn(params):
            model = Mlp(net.specs, params, net.stats)
            out, cache = model.forward(x, mode="train", rng=Rng(1234))
            loss, grad = mse_loss(out, x)
            _, grads = model.backward(cache, grad)
            return loss, grads

        report = finite_diff_grad_check(fn, net.params, h=1e-5, tol=1e-5)
        assert report.passed, str(report)


class TestReconstruct:
    def test_overfit_identity_capable_ae(self):
        # latent >= input dim and 10 points: the net can memorize
        raw = Rng(7).normal((10, 3))
        scaler = MinMaxScaler.fit(raw)
        config = AutoencoderConfig(
            input_dim=3,
            latent_dim=4,
            hidden_dims=(8,),
            dropout_rate=0.0,
            learning_rate=0.01,
            epochs=1500,
            batch_size=10,
        )
        model, history = train_autoencoder(scaler.apply(raw), config, scaler, Rng(8))
        recon = reconstruct(model, raw)
        span = raw.max(axis=0) - raw.min(axis=0)
        rel = np.abs(recon - raw) / span
        assert rel.mean() < 1e-2, f"mean relative reconstruction error {rel.mean():.4f}"

    def test_untrained_model_output_stays_in_scaler_box(self):
        raw, scaled, scaler = scaled_blob(n=40)
        config = AutoencoderConfig(input_dim=8, **{**SMALL_AE, "epochs": 0})
        model, _ = train_autoencoder(scaled, config, scaler, Rng(9))
        recon = reconstruct(model, raw)
        assert np.all(recon >= scaler.minimum - 1e-9)
        assert np.all(recon <= scaler.maximum + 1e-9)

    def test_vae_eval_reconstruction_is_deterministic(self):
        raw, scaled, scaler = scaled_blob(n=60)
        config = VaeConfig(input_dim=8, latent_dim=3, hidden_dim=8, epochs=3)
        model, _ = train_vae(scaled, config, scaler, Rng(10))
        r1 = reconstruct(model, raw)
        r2 = reconstruct(model, raw)
        np.testing.assert_array_equal(r1, r2)

    def test_vae_sampling_mode_needs_rng_and_differs(self):
        raw, scaled, scaler = scaled_blob(n=60)
        config = VaeConfig(input_dim=8, latent_dim=3, hidden_dim=8, epochs=3)
        model, _ = train_vae(scaled, config, scaler, Rng(10))
        with pytest.raises(UsageError):
            reconstruct(model, raw, sample=True)
        s1 = reconstruct(model, raw, sample=True, rng=Rng(1))
        s2 = reconstruct(model, raw, sample=True, rng=Rng(2))
        assert not np.array_equal(s1, s2)

    def test_dimension_mismatch_rejected(self):
        raw, scaled, scaler = scaled_blob(n=30)
        config = AutoencoderConfig(input_dim=8, **{**SMALL_AE, "epochs": 1})
        model, _ = train_autoencoder(scaled, config, scaler, Rng(11))
        with pytest.raises(ShapeError):
            reconstruct(model, raw[:, :5])


class TestDenoising:
    def test_zero_sigma_matches_plain_ae_exactly(self):
        _, scaled, scaler = scaled_blob(n=90)
        ae_config = AutoencoderConfig(input_dim=8, **{**SMALL_AE, "epochs": 8})
        _, h_ae = train_autoencoder(scaled, ae_config, scaler, Rng(42))
        _, h_dae = train_dae(
            scaled, DenoisingConfig(ae_config, GaussianCorruption(0.0)), scaler, Rng(42)
        )
        assert h_ae == h_dae

    def test_masking_rate_hits_expected_fraction(self):
        batch = np.ones((100, 100))
        corrupted = MaskingCorruption(0.3).apply(batch, Rng(12))
        zero_fraction = np.mean(corrupted == 0.0)
        assert zero_fraction == pytest.approx(0.3, abs=0.02)

    def test_training_progress_with_corruption(self):
        _, scaled, scaler = scaled_blob()
        config = DenoisingConfig(
            AutoencoderConfig(input_dim=8, **SMALL_AE), GaussianCorruption(0.1)
        )
        _, history = train_dae(scaled, config, scaler, Rng(13))
        assert history[-1] < history[0]

    def test_invalid_corruption_rejected(self):
        with pytest.raises(ConfigError):
            GaussianCorruption(-1.0)
        with pytest.raises(ConfigError):
            MaskingCorruption(1.0)


class TestReparameterize:
    def test_unit_sigma(self):
        z = reparameterize(np.array([1.0, 2.0]), np.array([0.0, 0.0]), np.array([0.5, -0.5]))
        np.testing.assert_allclose(z, [1.5, 1.5])

    def test_zero_eps_returns_mean(self):
        mu = np.array([3.0, -1.0])
        z = reparameterize(mu, np.array([2.0, 0.3]), np.zeros(2))
        np.testing.assert_array_equal(z, mu)

    def test_sigma_two(self):
        z = reparameterize(np.array([0.0]), np.array([np.log(4.0)]), np.array([1.0]))
        np.testing.assert_allclose(z, [2.0])

    def test_sample_statistics(self):
        mu = np.array([0.7])
        log_var = np.array([np.log(2.5)])
        n = 10_000
        eps = Rng(14).normal((n, 1))
        z = reparameterize(np.tile(mu, (n, 1)), np.tile(log_var, (n, 1)), eps)
        sigma = np.sqrt(2.5)
        assert abs(z.mean() - 0.7) < 4 * sigma / np.sqrt(n)
        assert abs(z.var() - 2.5) / 2.5 < 0.1

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            reparameterize(np.zeros(2), np.zeros(3), np.zeros(2))


class TestVaeTraining:
    def test_kl_non_negative_every_epoch(self):
        _, scaled, scaler = scaled_blob()
        config = VaeConfig(input_dim=8, latent_dim=3, hidden_dim=10, epochs=15)
        _, history = train_vae(scaled, config, scaler, Rng(15))
        assert all(kl >= 0 for _, kl in history)

    def test_total_loss_drops_thirty_percent(self):
        _, scaled, scaler = scaled_blob(n=200)
        config = VaeConfig(input_dim=8, latent_dim=3, hidden_dim=10, beta=1.0, epochs=30)
        _, history = train_vae(scaled, config, scaler, Rng(16))
        total = [r + k for r, k in history]
        assert total[-1] <= 0.7 * total[0], f"loss went {total[0]:.4f} -> {total[-1]:.4f}"

    def test_beta_zero_reduces_to_stochastic_autoencoder(self):
        _, scaled, scaler = scaled_blob(n=120)
        config = VaeConfig(input_dim=8, latent_dim=3, hidden_dim=10, beta=0.0, epochs=20)
        _, history = train_vae(scaled, config, scaler, Rng(17))
        recons = [r for r, _ in history]
        assert recons[-1] < recons[0]

    def test_same_seed_reproduces_history(self):
        _, scaled, scaler = scaled_blob(n=80)
        config = VaeConfig(input_dim=8, latent_dim=3, hidden_dim=8, epochs=4)
        _, h1 = train_vae(scaled, config, scaler, Rng(18))
        _, h2 = train_vae(scaled, config, scaler, Rng(18))
        assert h1 == h2

    def test_gradients_through_reparameterization(self):
        rng = Rng(19)
        x = rng.child("x").uniform(0.1, 0.9, (4, 5))
        config = VaeConfig(input_dim=5, latent_dim=2, hidden_dim=4, dropout_rate=0.25, beta=1.0)
        scaler = MinMaxScaler.fit(x)
        model = VaeModel.init(config, scaler, rng.child("init"))
        eps = rng.child("eps").normal((4, 2))
        params = model.params()

        def fn(_params):
            recon, kl, grads, _ = model.step_grads(x, eps, rng=Rng(777))
            return recon + config.beta * kl, grads

        report = finite_diff_grad_check(fn, params, h=1e-5, tol=1e-5)
        assert report.passed, str(report)


class TestViewStack:
    def test_only_original(self):
        stack = build_view_stack(np.zeros((5, 4)))
        assert stack.view_count == 1
        assert stack.view_names == ("original",)

    def test_all_four_views_in_fixed_order(self):
        base = np.zeros((3, 4))
        stack = build_view_stack(base, base + 1, base + 2, base + 3, gen_name="vae")
        assert stack.view_count == 4
        assert stack.view_names == ("original", "linear", "autoencoder", "vae")
        np.testing.assert_array_equal(stack.data[:, 0], base)
        np.testing.assert_array_equal(stack.data[:, 3], base + 3)

    def test_gap_in_views_keeps_order(self):
        base = np.zeros((3, 4))
        stack = build_view_stack(base, None, base + 2, None)
        assert stack.view_names == ("original", "autoencoder")

    def test_mismatched_view_named_in_error(self):
        base = np.zeros((3, 4))
        with pytest.raises(ShapeError, match="autoencoder"):
            build_view_stack(base, None, np.zeros((3, 5)), None)
