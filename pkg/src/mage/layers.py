"""Dense feed-forward layer kit with hand-derived backpropagation.

A model is an ordered list of :class:`LayerSpec` (linear, batch norm,
dropout, activation) plus a flat ``{name: array}`` parameter dict, wrapped
by :class:`Mlp`. ``forward`` is pure: it never mutates running statistics
or global state, it just returns the output together with a
:class:`ForwardCache` holding everything ``backward`` needs. Training
loops commit batch-norm running statistics explicitly via
``commit_stats`` after each accepted step.

Conventions: inputs are ``(batch, features)`` float64; linear weights are
``(in_dim, out_dim)`` so that ``y = x @ w + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, UsageError
from .rng import Rng

__all__ = ["LayerSpec", "ForwardCache", "Mlp", "linear", "batch_norm", "dropout", "activation"]

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_ACTIVATIONS = ("leaky_relu", "relu", "sigmoid", "tanh", "identity")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the chain; ``kind`` decides which fields matter."""

    kind: str
    in_dim: int = 0
    out_dim: int = 0
    activation: str = "identity"
    slope: float = 0.01
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.kind == "linear":
            if self.in_dim < 1 or self.out_dim < 1:
                raise ShapeError(f"linear layer needs in_dim, out_dim >= 1, got ({self.in_dim}, {self.out_dim})")
        elif self.kind == "batch_norm":
            if self.in_dim < 1:
                raise ShapeError(f"batch_norm layer needs a positive feature count, got {self.in_dim}")
        elif self.kind == "dropout":
            if not 0.0 <= self.dropout_rate <= 1.0:
                raise ShapeError(f"dropout rate must lie in [0, 1], got {self.dropout_rate}")
        elif self.kind == "activation":
            if self.activation not in _ACTIVATIONS:
                raise ShapeError(f"unknown activation {self.activation!r}")
            if self.activation == "leaky_relu" and self.slope <= 0:
                raise ShapeError(f"leaky_relu slope must be positive, got {self.slope}")
        else:
            raise ShapeError(f"unknown layer kind {self.kind!r}")


def linear(in_dim: int, out_dim: int) -> LayerSpec:
    return LayerSpec("linear", in_dim=in_dim, out_dim=out_dim)


def batch_norm(dim: int) -> LayerSpec:
    return LayerSpec("batch_norm", in_dim=dim, out_dim=dim)


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", dropout_rate=rate)


def activation(name: str, slope: float = 0.01) -> LayerSpec:
    return LayerSpec("activation", activation=name, slope=slope)


@dataclass
class ForwardCache:
    """Per-layer values saved by a forward pass, consumed by backward."""

    mode: str
    layers: list = field(default_factory=list)
    batch_stats: dict = field(default_factory=dict)  # name -> (mean, unbiased var)


class Mlp:
    """Ordered layer chain with parameters and batch-norm running stats."""

    def __init__(self, specs, params: dict, stats: dict):
        self.specs = tuple(specs)
        self.params = params
        self.stats = stats

    @classmethod
    def init(cls, specs, rng: Rng) -> "Mlp":
        """Scaled-uniform init for linear weights, identity-ish for the rest."""
        params: dict[str, np.ndarray] = {}
        stats: dict[str, np.ndarray] = {}
        for i, spec in enumerate(specs):
            if spec.kind == "linear":
                bound = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
                params[f"l{i}.w"] = rng.uniform(-bound, bound, (spec.in_dim, spec.out_dim))
                params[f"l{i}.b"] = np.zeros(spec.out_dim)
            elif spec.kind == "batch_norm":
                params[f"l{i}.gamma"] = np.ones(spec.in_dim)
                params[f"l{i}.beta"] = np.zeros(spec.in_dim)
                stats[f"l{i}.mean"] = np.zeros(spec.in_dim)
                stats[f"l{i}.var"] = np.ones(spec.in_dim)
        return cls(specs, params, stats)

    @property
    def in_dim(self) -> int:
        for spec in self.specs:
            if spec.kind in ("linear", "batch_norm"):
                return spec.in_dim
        return 0

    @property
    def out_dim(self) -> int:
        for spec in reversed(self.specs):
            if spec.kind == "linear":
                return spec.out_dim
            if spec.kind == "batch_norm":
                return spec.in_dim
        return 0

    def forward(self, x: np.ndarray, mode: str = "train", rng: Rng | None = None):
        """Run the chain; returns ``(output, cache)``.

        Eval mode is deterministic: dropout is the identity and batch norm
        uses running statistics. Train mode records what backward needs and
        collects fresh batch statistics in the cache (not committed here).
        """
        if mode not in ("train", "eval"):
            raise UsageError(f"mode must be 'train' or 'eval', got {mode!r}")
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2:
            raise ShapeError(f"input must be 2-d (batch, features), got shape {h.shape}")
        cache = ForwardCache(mode=mode)
        for i, spec in enumerate(self.specs):
            if spec.kind == "linear":
                w = self.params[f"l{i}.w"]
                if h.shape[1] != spec.in_dim:
                    raise ShapeError(
                        f"layer {i} (linear): input has {h.shape[1]} features, expected {spec.in_dim}"
                    )
                cache.layers.append(("linear", i, h))
                h = h @ w + self.params[f"l{i}.b"]
            elif spec.kind == "batch_norm":
                if h.shape[1] != spec.in_dim:
                    raise ShapeError(
                        f"layer {i} (batch_norm): input has {h.shape[1]} features, expected {spec.in_dim}"
                    )
                gamma = self.params[f"l{i}.gamma"]
                beta = self.params[f"l{i}.beta"]
                if mode == "train":
                    mean = h.mean(axis=0)
                    var = h.var(axis=0)
                    inv_std = 1.0 / np.sqrt(var + BN_EPS)
                    xhat = (h - mean) * inv_std
                    # running stats track the biased batch variance so that a
                    # fully converged eval pass reproduces train normalization
                    cache.batch_stats[f"l{i}"] = (mean, var)
                    cache.layers.append(("batch_norm", i, (xhat, inv_std)))
                else:
                    inv_std = 1.0 / np.sqrt(self.stats[f"l{i}.var"] + BN_EPS)
                    xhat = (h - self.stats[f"l{i}.mean"]) * inv_std
                    cache.layers.append(("batch_norm", i, (xhat, inv_std)))
                h = gamma * xhat + beta
            elif spec.kind == "dropout":
                if mode == "train" and spec.dropout_rate > 0.0:
                    if rng is None:
                        raise UsageError(f"layer {i} (dropout): train mode needs an rng")
                    keep = 1.0 - spec.dropout_rate
                    mask = (rng.uniform(size=h.shape) >= spec.dropout_rate) / keep
                    cache.layers.append(("dropout", i, mask))
                    h = h * mask
                else:
                    cache.layers.append(("dropout", i, None))
            elif spec.kind == "activation":
                if spec.activation == "leaky_relu":
                    cache.layers.append(("activation", i, h))
                    h = np.where(h >= 0, h, spec.slope * h)
                elif spec.activation == "relu":
                    cache.layers.append(("activation", i, h))
                    h = np.maximum(h, 0.0)
                elif spec.activation == "sigmoid":
                    h = 1.0 / (1.0 + np.exp(-h))
                    cache.layers.append(("activation", i, h))
                elif spec.activation == "tanh":
                    h = np.tanh(h)
                    cache.layers.append(("activation", i, h))
                else:  # identity
                    cache.layers.append(("activation", i, None))
        if not np.all(np.isfinite(h)):
            raise NumericError("forward pass produced non-finite values")
        return h, cache

    def backward(self, cache: ForwardCache, grad_out: np.ndarray):
        """Exact gradients of the cached computation.

        Returns ``(grad_input, grads)`` where ``grads`` is keyed like
        ``params``. Only train-mode caches are accepted.
        """
        if cache.mode != "train":
            raise UsageError("backward needs a cache from a train-mode forward pass")
        g = np.asarray(grad_out, dtype=np.float64)
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        for kind, i, saved in reversed(cache.layers):
            spec = self.specs[i]
            if kind == "linear":
                x = saved
                grads[f"l{i}.w"] += x.T @ g
                grads[f"l{i}.b"] += g.sum(axis=0)
                g = g @ self.params[f"l{i}.w"].T
            elif kind == "batch_norm":
                xhat, inv_std = saved
                gamma = self.params[f"l{i}.gamma"]
                grads[f"l{i}.gamma"] += (g * xhat).sum(axis=0)
                grads[f"l{i}.beta"] += g.sum(axis=0)
                dxhat = g * gamma
                n = xhat.shape[0]
                g = (inv_std / n) * (
                    n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
                )
            elif kind == "dropout":
                if saved is not None:
                    g = g * saved
            elif kind == "activation":
                if spec.activation == "leaky_relu":
                    g = g * np.where(saved >= 0, 1.0, spec.slope)
                elif spec.activation == "relu":
                    g = g * (saved > 0)
                elif spec.activation == "sigmoid":
                    g = g * saved * (1.0 - saved)
                elif spec.activation == "tanh":
                    g = g * (1.0 - saved**2)
        return g, grads

    def commit_stats(self, cache: ForwardCache, momentum: float = BN_MOMENTUM) -> None:
        """Fold the cache's batch statistics into the running estimates."""
        for key, (mean, var) in cache.batch_stats.items():
            self.stats[f"{key}.mean"] = (1 - momentum) * self.stats[f"{key}.mean"] + momentum * mean
            self.stats[f"{key}.var"] = (1 - momentum) * self.stats[f"{key}.var"] + momentum * var

    def copy(self) -> "Mlp":
        return Mlp(
            self.specs,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.stats.items()},
        )
