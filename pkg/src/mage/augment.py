"""Embedding view generators: noise shift, AE, DAE, VAE, and view stacks.

All reconstruction models operate on min-max-scaled embeddings (their
decoders end in a sigmoid, so the data must live in [0, 1]) and are
trained on the training split only. ``reconstruct`` takes raw vectors,
applies the model's stored scaler, runs an eval-mode forward pass, and
inverse-scales the output back into embedding space.

Randomness discipline: each training run derives named child streams
("init", "shuffle", "dropout", "corrupt", "eps") from the run rng, so a
denoising run with zero corruption consumes exactly the same draws as a
plain autoencoder run and reproduces its trajectory bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MinMaxScaler
from .errors import ConfigError, ShapeError, UsageError
from .layers import Mlp, activation, batch_norm, dropout, linear
from .losses import gaussian_kl_with_grad, mse_loss
from .optim import Adam
from .rng import Rng

__all__ = [
    "LinearNoiseConfig",
    "linear_transform",
    "AutoencoderConfig",
    "AutoencoderModel",
    "GaussianCorruption",
    "MaskingCorruption",
    "DenoisingConfig",
    "VaeConfig",
    "VaeModel",
    "train_autoencoder",
    "train_dae",
    "train_vae",
    "reconstruct",
    "reparameterize",
    "ViewStack",
    "build_view_stack",
]

VIEW_ORDER = ("original", "linear", "autoencoder", "generative")


@dataclass(frozen=True)
class LinearNoiseConfig:
    """Bounds of the componentwise uniform shift, in raw embedding units."""

    r_min: float = -0.05
    r_max: float = 0.05

    def __post_init__(self):
        if self.r_min > self.r_max:
            raise ConfigError(f"r_min {self.r_min} > r_max {self.r_max}")


def linear_transform(vectors: np.ndarray, config: LinearNoiseConfig, rng: Rng) -> np.ndarray:
    """Add independent uniform noise in [r_min, r_max] to every component."""
    vectors = np.asarray(vectors, dtype=np.float64)
    return vectors + rng.uniform(config.r_min, config.r_max, vectors.shape)


@dataclass(frozen=True)
class AutoencoderConfig:
    input_dim: int
    latent_dim: int = 32
    hidden_dims: tuple = (384, 128)
    dropout_rate: float = 0.2
    leaky_slope: float = 0.01
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 64

    def __post_init__(self):
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ConfigError("input_dim and latent_dim must be >= 1")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"hidden dims must be >= 1, got {self.hidden_dims}")


def _autoencoder_specs(config: AutoencoderConfig):
    """Encoder tapering to the latent size, mirrored decoder, sigmoid out."""
    specs = []
    prev = config.input_dim
    for h in config.hidden_dims:
        specs += [
            linear(prev, h),
            batch_norm(h),
            activation("leaky_relu", slope=config.leaky_slope),
            dropout(config.dropout_rate),
        ]
        prev = h
    specs.append(linear(prev, config.latent_dim))
    prev = config.latent_dim
    for h in reversed(config.hidden_dims):
        specs += [
            linear(prev, h),
            batch_norm(h),
            activation("leaky_relu", slope=config.leaky_slope),
            dropout(config.dropout_rate),
        ]
        prev = h
    specs += [linear(prev, config.input_dim), activation("sigmoid")]
    return specs


@dataclass
class AutoencoderModel:
    config: AutoencoderConfig
    net: Mlp
    scaler: MinMaxScaler


@dataclass(frozen=True)
class GaussianCorruption:
    """Additive N(0, sigma^2) noise in scaled space; sigma 0 is a no-op."""

    sigma: float = 0.1

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")

    def apply(self, batch: np.ndarray, rng: Rng) -> np.ndarray:
        if self.sigma == 0.0:
            return batch
        return batch + self.sigma * rng.normal(batch.shape)


@dataclass(frozen=True)
class MaskingCorruption:
    """Zero out each component independently with the given rate."""

    rate: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"masking rate must lie in [0, 1), got {self.rate}")

    def apply(self, batch: np.ndarray, rng: Rng) -> np.ndarray:
        if self.rate == 0.0:
            return batch
        return batch * (rng.uniform(size=batch.shape) >= self.rate)


@dataclass(frozen=True)
class DenoisingConfig:
    autoencoder: AutoencoderConfig
    corruption: GaussianCorruption | MaskingCorruption = GaussianCorruption(0.1)


def _check_scaled(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.size == 0:
        raise UsageError("need at least one training vector")
    if vectors.min() < -0.01 or vectors.max() > 1.01:
        raise UsageError(
            "training vectors look unscaled (outside [-0.01, 1.01]); apply the min-max scaler first"
        )
    return vectors


def _batches(n: int, batch_size: int, rng: Rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _train_reconstruction(vectors, config: AutoencoderConfig, scaler, rng: Rng, corruption=None):
    """Shared AE/DAE loop: corrupt (optionally), reconstruct the clean input."""
    x_all = _check_scaled(vectors)
    net = Mlp.init(_autoencoder_specs(config), rng.child("init"))
    opt = Adam(config.learning_rate)
    shuffle_rng = rng.child("shuffle")
    dropout_rng = rng.child("dropout")
    corrupt_rng = rng.child("corrupt")
    history: list[float] = []
    for _ in range(config.epochs):
        losses = []
        for idx in _batches(x_all.shape[0], config.batch_size, shuffle_rng):
            clean = x_all[idx]
            noisy = corruption.apply(clean, corrupt_rng) if corruption is not None else clean
            out, cache = net.forward(noisy, mode="train", rng=dropout_rng)
            loss, grad = mse_loss(out, clean)
            _, grads = net.backward(cache, grad)
            opt.step(net.params, grads)
            net.commit_stats(cache)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return AutoencoderModel(config=config, net=net, scaler=scaler), history


def train_autoencoder(vectors, config: AutoencoderConfig, scaler: MinMaxScaler, rng: Rng):
    """Fit the plain autoencoder on scaled vectors; returns (model, history)."""
    return _train_reconstruction(vectors, config, scaler, rng, corruption=None)


def train_dae(vectors, config: DenoisingConfig, scaler: MinMaxScaler, rng: Rng):
    """Fit the denoising autoencoder: corrupted input, clean target."""
    model, history = _train_reconstruction(
        vectors, config.autoencoder, scaler, rng, corruption=config.corruption
    )
    return model, history


@dataclass(frozen=True)
class VaeConfig:
    input_dim: int
    latent_dim: int = 256
    hidden_dim: int = 512
    dropout_rate: float = 0.2
    beta: float = 1.0
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 64

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if min(self.input_dim, self.latent_dim, self.hidden_dim) < 1:
            raise ConfigError("vae dims must be >= 1")


def _vae_specs(config: VaeConfig) -> dict:
    """Layer chains of the four VAE sub-networks, keyed by their role."""
    return {
        "trunk": [
            linear(config.input_dim, config.hidden_dim),
            batch_norm(config.hidden_dim),
            activation("relu"),
            dropout(config.dropout_rate),
        ],
        "mu": [linear(config.hidden_dim, config.latent_dim)],
        "lv": [linear(config.hidden_dim, config.latent_dim)],
        "decoder": [
            linear(config.latent_dim, config.hidden_dim),
            batch_norm(config.hidden_dim),
            activation("relu"),
            dropout(config.dropout_rate),
            linear(config.hidden_dim, config.input_dim),
            activation("sigmoid"),
        ],
    }


@dataclass
class VaeModel:
    """Shared trunk, mean/log-variance heads, mirrored decoder."""

    config: VaeConfig
    trunk: Mlp
    mu_head: Mlp
    lv_head: Mlp
    decoder: Mlp
    scaler: MinMaxScaler

    @classmethod
    def init(cls, config: VaeConfig, scaler: MinMaxScaler, rng: Rng) -> "VaeModel":
        specs = _vae_specs(config)
        trunk = Mlp.init(specs["trunk"], rng.child("trunk"))
        mu_head = Mlp.init(specs["mu"], rng.child("mu"))
        lv_head = Mlp.init(specs["lv"], rng.child("lv"))
        decoder = Mlp.init(specs["decoder"], rng.child("decoder"))
        return cls(config, trunk, mu_head, lv_head, decoder, scaler)

    def params(self) -> dict:
        """Flat name -> array view over all four nets (same objects)."""
        out = {}
        for prefix, net in (
            ("trunk", self.trunk),
            ("mu", self.mu_head),
            ("lv", self.lv_head),
            ("dec", self.decoder),
        ):
            for name, arr in net.params.items():
                out[f"{prefix}.{name}"] = arr
        return out

    def encode(self, x: np.ndarray, mode: str = "eval", rng: Rng | None = None):
        """Returns (mu, log_var, caches)."""
        h, c_trunk = self.trunk.forward(x, mode=mode, rng=rng)
        mu, c_mu = self.mu_head.forward(h, mode=mode)
        lv, c_lv = self.lv_head.forward(h, mode=mode)
        return mu, lv, (c_trunk, c_mu, c_lv)

    def step_grads(self, x: np.ndarray, eps: np.ndarray, rng: Rng | None = None, mode: str = "train"):
        """One forward/backward pass with a fixed noise draw.

        Returns (recon_loss, kl, grads) where grads is keyed like
        ``params()``. Used both by training and by the gradient checker
        (which freezes ``eps`` and the dropout rng).
        """
        mu, lv, (c_trunk, c_mu, c_lv) = self.encode(x, mode=mode, rng=rng)
        z = reparameterize(mu, lv, eps)
        out, c_dec = self.decoder.forward(z, mode=mode, rng=rng)
        recon, g_out = mse_loss(out, x)
        kl, g_mu_kl, g_lv_kl = gaussian_kl_with_grad(mu, lv)
        beta = self.config.beta

        g_z, grads_dec = self.decoder.backward(c_dec, g_out)
        # z = mu + exp(lv/2) * eps
        sigma = np.exp(0.5 * lv)
        g_mu = g_z + beta * g_mu_kl
        g_lv = g_z * eps * sigma * 0.5 + beta * g_lv_kl
        g_h_mu, grads_mu = self.mu_head.backward(c_mu, g_mu)
        g_h_lv, grads_lv = self.lv_head.backward(c_lv, g_lv)
        _, grads_trunk = self.trunk.backward(c_trunk, g_h_mu + g_h_lv)

        grads = {}
        for prefix, g in (("trunk", grads_trunk), ("mu", grads_mu), ("lv", grads_lv), ("dec", grads_dec)):
            for name, arr in g.items():
                grads[f"{prefix}.{name}"] = arr
        caches = (c_trunk, c_mu, c_lv, c_dec)
        return recon, kl, grads, caches

    def commit_stats(self, caches) -> None:
        c_trunk, _, _, c_dec = caches
        self.trunk.commit_stats(c_trunk)
        self.decoder.commit_stats(c_dec)


def reparameterize(mu: np.ndarray, log_var: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(log_var / 2) * eps, the gradient-friendly Gaussian draw."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if mu.shape != log_var.shape or mu.shape != eps.shape:
        raise ShapeError(
            f"mu {mu.shape}, log_var {log_var.shape}, eps {eps.shape} must share a shape"
        )
    return mu + np.exp(0.5 * log_var) * eps


def train_vae(vectors, config: VaeConfig, scaler: MinMaxScaler, rng: Rng):
    """Fit the VAE on scaled vectors.

    Loss per batch is reconstruction + beta * KL; the history records the
    two terms per epoch as ``(recon, kl)`` pairs.
    """
    x_all = _check_scaled(vectors)
    model = VaeModel.init(config, scaler, rng.child("init"))
    params = model.params()
    opt = Adam(config.learning_rate)
    shuffle_rng = rng.child("shuffle")
    dropout_rng = rng.child("dropout")
    eps_rng = rng.child("eps")
    history: list[tuple[float, float]] = []
    for _ in range(config.epochs):
        recons, kls = [], []
        for idx in _batches(x_all.shape[0], config.batch_size, shuffle_rng):
            batch = x_all[idx]
            eps = eps_rng.normal((batch.shape[0], config.latent_dim))
            recon, kl, grads, caches = model.step_grads(batch, eps, rng=dropout_rng)
            opt.step(params, grads)
            model.commit_stats(caches)
            recons.append(recon)
            kls.append(kl)
        history.append((float(np.mean(recons)), float(np.mean(kls))))
    return model, history


def reconstruct(model, vectors: np.ndarray, sample: bool = False, rng: Rng | None = None) -> np.ndarray:
    """Run raw vectors through a trained model and back to embedding space.

    Deterministic by default; for the VAE the mean of the latent posterior
    is decoded. ``sample=True`` draws z = mu + sigma * eps instead (VAE
    only), for generating extra synthetic rows.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if isinstance(model, AutoencoderModel):
        expected = model.config.input_dim
    elif isinstance(model, VaeModel):
        expected = model.config.input_dim
    else:
        raise UsageError(f"cannot reconstruct with a {type(model).__name__}")
    if vectors.ndim != 2 or vectors.shape[1] != expected:
        raise ShapeError(f"vectors shape {vectors.shape} does not match model input dim {expected}")

    scaled = model.scaler.apply(vectors)
    if isinstance(model, AutoencoderModel):
        out, _ = model.net.forward(scaled, mode="eval")
    else:
        mu, lv, _ = model.encode(scaled, mode="eval")
        if sample:
            if rng is None:
                raise UsageError("sampling reconstruction needs an rng")
            z = reparameterize(mu, lv, rng.normal(mu.shape))
        else:
            z = mu
        out, _ = model.decoder.forward(z, mode="eval")
    return model.scaler.invert(out)


@dataclass(frozen=True)
class ViewStack:
    """Per-sample ordered views: (n_samples, n_views, dim)."""

    data: np.ndarray
    view_names: tuple[str, ...]

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeError(f"view stack must be (samples, views, dim), got {self.data.shape}")
        if self.data.shape[1] != len(self.view_names):
            raise ShapeError(
                f"{self.data.shape[1]} views in data but {len(self.view_names)} names"
            )

    @property
    def view_count(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def __len__(self) -> int:
        return self.data.shape[0]


def build_view_stack(original, linear_view=None, ae_view=None, gen_view=None, gen_name="generative") -> ViewStack:
    """Stack the available views in the fixed order original, linear, ae, gen."""
    original = np.asarray(original, dtype=np.float64)
    if original.ndim != 2:
        raise ShapeError(f"original view must be (samples, dim), got {original.shape}")
    views = [("original", original)]
    for name, v in (("linear", linear_view), ("autoencoder", ae_view), (gen_name, gen_view)):
        if v is None:
            continue
        v = np.asarray(v, dtype=np.float64)
        if v.shape != original.shape:
            raise ShapeError(f"view {name!r} has shape {v.shape}, expected {original.shape}")
        views.append((name, v))
    names = tuple(name for name, _ in views)
    data = np.stack([v for _, v in views], axis=1)
    return ViewStack(data=data, view_names=names)
