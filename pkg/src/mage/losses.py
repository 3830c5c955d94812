"""Loss functions and their analytic gradients.

Each loss returns ``(value, grad)`` so training loops never recompute the
forward pass. Everything is plain float64 numpy; logits are shaped
``(batch, classes)`` and labels are integer class indices.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError

__all__ = [
    "softmax",
    "cross_entropy_loss",
    "mse_loss",
    "gaussian_kl",
    "gaussian_kl_with_grad",
]


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``; rows sum to 1."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of integer labels under softmax logits.

    Returns ``(loss, grad_logits)`` with ``grad = (softmax - onehot) / n``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-d (batch, classes), got shape {logits.shape}")
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch size {n}")
    if n < 1:
        raise ValidationError("cross entropy needs at least one row")
    if labels.min() < 0 or labels.max() >= k:
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise ValidationError(f"label {bad} outside [0, {k})")

    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))

    grad = softmax(logits, axis=1)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared elementwise error and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size
    return loss, grad


def gaussian_kl(mu: np.ndarray, log_var: np.ndarray) -> float:
    """KL divergence of N(mu, exp(log_var)) from the standard normal.

    Closed form, averaged over rows (samples):
    mean_n  1/2 * sum_d (exp(log_var) + mu^2 - 1 - log_var).
    Non-negative for all finite inputs.
    """
    kl, _, _ = gaussian_kl_with_grad(mu, log_var)
    return kl


def gaussian_kl_with_grad(mu: np.ndarray, log_var: np.ndarray):
    """As :func:`gaussian_kl`, also returning gradients w.r.t. mu and log_var."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise ShapeError(f"mu shape {mu.shape} != log_var shape {log_var.shape}")
    n = mu.shape[0] if mu.ndim > 1 else 1
    var = np.exp(log_var)
    kl = float(0.5 * np.sum(var + mu**2 - 1.0 - log_var) / n)
    grad_mu = mu / n
    grad_log_var = 0.5 * (var - 1.0) / n
    return kl, grad_mu, grad_log_var
