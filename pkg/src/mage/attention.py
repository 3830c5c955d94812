"""Multi-head attention over embedding views, guided by context vectors.

Each head projects every view of a sample into its own subspace, scores
the projections against a trainable context vector, softmax-normalizes
the scores into per-view weights, and takes the weighted sum. The head
outputs are concatenated back to the full embedding width, so downstream
classifiers always see a single ``model_dim`` vector regardless of how
many views a sample carries. Projections and context vectors are ordinary
trainable parameters: classification loss flows through ``mage_backward``
into both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import ViewStack
from .errors import ConfigError, ShapeError, UsageError
from .losses import softmax
from .rng import Rng

__all__ = ["MageParams", "AttentionTrace", "mage_init", "mage_forward", "mage_backward"]


@dataclass
class MageParams:
    """Per-head projections ``w: (heads, head_dim, model_dim)`` and context
    vectors ``c: (heads, head_dim)``; ``temperature`` divides the scores."""

    num_heads: int
    model_dim: int
    w: np.ndarray
    c: np.ndarray
    temperature: float = 1.0

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads

    def as_dict(self) -> dict:
        return {"w": self.w, "c": self.c}


@dataclass
class AttentionTrace:
    """Per-head view weights ``(samples, heads, views)`` plus the fused output."""

    weights: np.ndarray
    output: np.ndarray
    view_names: tuple[str, ...]

    def rows(self, sample_ids=None):
        """Flatten to (sample, head, view, weight) rows for export."""
        n, n_heads, n_views = self.weights.shape
        ids = sample_ids if sample_ids is not None else [str(i) for i in range(n)]
        for i in range(n):
            for h in range(n_heads):
                for v in range(n_views):
                    yield ids[i], h, self.view_names[v], float(self.weights[i, h, v])


def mage_init(num_heads: int, model_dim: int, rng: Rng, temperature: float = 1.0) -> MageParams:
    """Scaled-uniform projections, unit-variance-over-sqrt(head_dim) contexts."""
    if num_heads < 1 or model_dim < 1:
        raise ConfigError(f"need num_heads, model_dim >= 1, got ({num_heads}, {model_dim})")
    if model_dim % num_heads != 0:
        raise ConfigError(f"model_dim {model_dim} not divisible by num_heads {num_heads}")
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    head_dim = model_dim // num_heads
    bound = np.sqrt(6.0 / (model_dim + head_dim))
    w = rng.uniform(-bound, bound, (num_heads, head_dim, model_dim))
    c = rng.normal((num_heads, head_dim)) / np.sqrt(head_dim)
    return MageParams(num_heads=num_heads, model_dim=model_dim, w=w, c=c, temperature=temperature)


def _as_views(stack) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(stack, ViewStack):
        return stack.data, stack.view_names
    views = np.asarray(stack, dtype=np.float64)
    if views.ndim != 3:
        raise ShapeError(f"views must be (samples, views, dim), got {views.shape}")
    return views, tuple(f"view{i}" for i in range(views.shape[1]))


def mage_forward(params: MageParams, stack):
    """Fuse a view stack into one vector per sample.

    Returns ``(output, trace, cache)``: output is ``(samples, model_dim)``,
    the trace records every head's view weights, and the cache feeds
    ``mage_backward``.
    """
    views, view_names = _as_views(stack)
    n, n_views, dim = views.shape
    if n_views < 1 or n == 0:
        raise UsageError("view stack is empty")
    if dim != params.model_dim:
        raise ShapeError(f"views have dim {dim}, attention expects {params.model_dim}")

    # proj: (n, heads, views, head_dim)
    proj = np.einsum("hkd,nvd->nhvk", params.w, views)
    scores = np.einsum("nhvk,hk->nhv", proj, params.c) / params.temperature
    alpha = softmax(scores, axis=2)
    head_out = np.einsum("nhv,nhvk->nhk", alpha, proj)
    output = head_out.reshape(n, params.model_dim)
    trace = AttentionTrace(weights=alpha, output=output, view_names=view_names)
    cache = (views, proj, alpha)
    return output, trace, cache


def mage_backward(params: MageParams, cache, grad_output: np.ndarray):
    """Exact gradients of the cached forward pass.

    Returns ``(grads, grad_views)`` with ``grads = {"w": ..., "c": ...}``.
    """
    if cache is None:
        raise UsageError("mage_backward needs the cache from mage_forward")
    views, proj, alpha = cache
    n = views.shape[0]
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != (n, params.model_dim):
        raise ShapeError(
            f"grad_output shape {grad_output.shape} != (samples, model_dim) = ({n}, {params.model_dim})"
        )
    d_out = grad_output.reshape(n, params.num_heads, params.head_dim)

    d_alpha = np.einsum("nhk,nhvk->nhv", d_out, proj)
    # softmax backward per head: ds_i = a_i * (da_i - sum_j a_j da_j)
    inner = np.sum(alpha * d_alpha, axis=2, keepdims=True)
    d_scores = alpha * (d_alpha - inner)

    d_c = np.einsum("nhv,nhvk->hk", d_scores, proj) / params.temperature
    d_proj = alpha[..., None] * d_out[:, :, None, :] + d_scores[..., None] * (
        params.c[None, :, None, :] / params.temperature
    )
    d_w = np.einsum("nhvk,nvd->hkd", d_proj, views)
    d_views = np.einsum("nhvk,hkd->nvd", d_proj, params.w)
    return {"w": d_w, "c": d_c}, d_views
