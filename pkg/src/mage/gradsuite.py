"""The full gradient verification suite over every differentiable component.

Each entry builds small random configurations (seeded) and compares the
hand-derived backward pass against central differences. The CLI's
``gradcheck`` command and the acceptance tests both run this; dimensions
are kept tiny so the whole suite finishes in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import MageParams, mage_backward, mage_forward, mage_init
from .augment import AutoencoderConfig, VaeConfig, VaeModel, _autoencoder_specs
from .classifiers import LstmParams, lstm_backward, lstm_forward, lstm_init, softmax_objective
from .data import MinMaxScaler
from .gradcheck import finite_diff_grad_check
from .layers import Mlp, activation, batch_norm, dropout, linear
from .losses import cross_entropy_loss, mse_loss
from .rng import Rng

__all__ = ["ComponentReport", "run_gradient_suite", "COMPONENTS"]


@dataclass(frozen=True)
class ComponentReport:
    component: str
    max_rel_error: float
    passed: bool


def _check_mlp(specs, in_dim, seed, loss="mse"):
    rng = Rng(seed)
    mlp = Mlp.init(specs, rng.child("init"))
    x = rng.child("x").normal((4, in_dim))
    out_dim = mlp.out_dim or in_dim
    target = rng.child("t").normal((4, out_dim))

    def fn(params):
        model = Mlp(specs, params, mlp.stats)
        y, cache = model.forward(x, mode="train", rng=Rng(seed + 10_000))
        value, grad = mse_loss(y, target)
        _, grads = model.backward(cache, grad)
        return value, grads

    return finite_diff_grad_check(fn, mlp.params)


def _component_linear(seed):
    return _check_mlp([linear(5, 3)], 5, seed)


def _component_batch_norm(seed):
    return _check_mlp([linear(4, 4), batch_norm(4)], 4, seed)


def _component_dropout(seed):
    return _check_mlp([linear(4, 4), dropout(0.4)], 4, seed)


def _component_activations(seed):
    acts = ["leaky_relu", "relu", "sigmoid", "tanh"]
    name = acts[seed % len(acts)]
    return _check_mlp([linear(4, 4), activation(name), linear(4, 2)], 4, seed)


def _component_autoencoder(seed):
    config = AutoencoderConfig(input_dim=4, latent_dim=2, hidden_dims=(3,), dropout_rate=0.3)
    specs = _autoencoder_specs(config)
    rng = Rng(seed)
    net = Mlp.init(specs, rng.child("init"))
    x = rng.child("x").uniform(0.05, 0.95, (4, 4))

    def fn(params):
        model = Mlp(specs, params, net.stats)
        y, cache = model.forward(x, mode="train", rng=Rng(seed + 20_000))
        value, grad = mse_loss(y, x)
        _, grads = model.backward(cache, grad)
        return value, grads

    return finite_diff_grad_check(fn, net.params)


def _component_dae(seed):
    # corrupted input fixed during the check; target stays the clean input
    config = AutoencoderConfig(input_dim=4, latent_dim=2, hidden_dims=(3,), dropout_rate=0.3)
    specs = _autoencoder_specs(config)
    rng = Rng(seed)
    net = Mlp.init(specs, rng.child("init"))
    clean = rng.child("x").uniform(0.05, 0.95, (4, 4))
    corrupted = clean + 0.05 * rng.child("noise").normal(clean.shape)

    def fn(params):
        model = Mlp(specs, params, net.stats)
        y, cache = model.forward(corrupted, mode="train", rng=Rng(seed + 30_000))
        value, grad = mse_loss(y, clean)
        _, grads = model.backward(cache, grad)
        return value, grads

    return finite_diff_grad_check(fn, net.params)


def _component_vae(seed):
    rng = Rng(seed)
    x = rng.child("x").uniform(0.1, 0.9, (4, 5))
    config = VaeConfig(input_dim=5, latent_dim=2, hidden_dim=4, dropout_rate=0.25, beta=1.0)
    model = VaeModel.init(config, MinMaxScaler.fit(x), rng.child("init"))
    eps = rng.child("eps").normal((4, 2))

    def fn(_params):
        recon, kl, grads, _ = model.step_grads(x, eps, rng=Rng(seed + 40_000))
        return recon + config.beta * kl, grads

    return finite_diff_grad_check(fn, model.params())


def _component_attention(seed):
    rng = Rng(seed)
    params = mage_init(2, 6, rng.child("init"))
    views = rng.child("views").normal((3, 3, 6))
    target = rng.child("t").normal((3, 6))

    def fn(p):
        model = MageParams(2, 6, p["w"], p["c"], temperature=1.0)
        out, _, cache = mage_forward(model, views)
        diff = out - target
        grads, _ = mage_backward(model, cache, 2.0 * diff)
        return float(np.sum(diff**2)), grads

    return finite_diff_grad_check(fn, params.as_dict())


def _component_lstm(seed):
    rng = Rng(seed)
    params = lstm_init(3, 4, 3, rng.child("init"))
    seqs = rng.child("x").normal((3, 4, 3))
    labels = np.array([seed % 3, (seed + 1) % 3, (seed + 2) % 3])

    def fn(p):
        model = LstmParams(3, 4, 3, p["wx"], p["wh"], p["b"], p["why"], p["by"])
        logits, _, cache = lstm_forward(model, seqs)
        value, grad = cross_entropy_loss(logits, labels)
        grads, _ = lstm_backward(model, cache, grad)
        return value, grads

    return finite_diff_grad_check(fn, params.as_dict())


def _component_softmax_head(seed):
    rng = Rng(seed)
    features = rng.child("x").normal((6, 4))
    labels = (rng.child("y").uniform(size=6) * 3).astype(int)
    objective = softmax_objective(features, labels, l2=1e-3, num_classes=3)
    theta0 = rng.child("theta").normal(3 * 4 + 3) * 0.3

    def fn(p):
        value, grad = objective(p["theta"])
        return value, {"theta": grad}

    return finite_diff_grad_check(fn, {"theta": theta0})


def _joint_fn(seed, head):
    rng = Rng(seed)
    stacks = rng.child("stacks").normal((3, 2, 4))
    labels = np.array([seed % 3, (seed + 1) % 3, (seed + 2) % 3])
    mage = mage_init(2, 4, rng.child("mage"))
    if head == "softmax":
        clf_w = rng.child("w").normal((3, 4)) * 0.3
        clf_b = np.zeros(3)
        params = {"mage.w": mage.w, "mage.c": mage.c, "clf.w": clf_w, "clf.b": clf_b}

        def fn(p):
            model = MageParams(2, 4, p["mage.w"], p["mage.c"], temperature=1.0)
            fused, _, cache = mage_forward(model, stacks)
            logits = fused @ p["clf.w"].T + p["clf.b"]
            value, grad_logits = cross_entropy_loss(logits, labels)
            mage_grads, _ = mage_backward(model, cache, grad_logits @ p["clf.w"])
            return value, {
                "mage.w": mage_grads["w"],
                "mage.c": mage_grads["c"],
                "clf.w": grad_logits.T @ fused,
                "clf.b": grad_logits.sum(axis=0),
            }

    else:
        lstm = lstm_init(4, 3, 3, rng.child("lstm"))
        params = {"mage.w": mage.w, "mage.c": mage.c, **lstm.as_dict()}

        def fn(p):
            model = MageParams(2, 4, p["mage.w"], p["mage.c"], temperature=1.0)
            clf = LstmParams(4, 3, 3, p["wx"], p["wh"], p["b"], p["why"], p["by"])
            fused, _, cache = mage_forward(model, stacks)
            logits, _, lstm_cache = lstm_forward(clf, fused[:, None, :])
            value, grad = cross_entropy_loss(logits, labels)
            lstm_grads, grad_seqs = lstm_backward(clf, lstm_cache, grad)
            mage_grads, _ = mage_backward(model, cache, grad_seqs[:, 0])
            out = dict(lstm_grads)
            out["mage.w"] = mage_grads["w"]
            out["mage.c"] = mage_grads["c"]
            return value, out

    return fn, params


def _component_joint_softmax(seed):
    fn, params = _joint_fn(seed, "softmax")
    return finite_diff_grad_check(fn, params)


def _component_joint_lstm(seed):
    fn, params = _joint_fn(seed, "lstm")
    return finite_diff_grad_check(fn, params)


COMPONENTS = {
    "linear": _component_linear,
    "batch_norm": _component_batch_norm,
    "dropout": _component_dropout,
    "activations": _component_activations,
    "autoencoder": _component_autoencoder,
    "denoising_autoencoder": _component_dae,
    "vae_reparameterized": _component_vae,
    "view_attention": _component_attention,
    "lstm_unroll": _component_lstm,
    "softmax_head": _component_softmax_head,
    "joint_attention_softmax": _component_joint_softmax,
    "joint_attention_lstm": _component_joint_lstm,
}


def run_gradient_suite(n_seeds: int = 10, tol: float = 1e-5) -> list[ComponentReport]:
    """Check every component across ``n_seeds`` random configurations."""
    reports = []
    for name, check in COMPONENTS.items():
        worst = 0.0
        for seed in range(n_seeds):
            report = check(seed)
            worst = max(worst, report.max_rel_error)
        reports.append(ComponentReport(component=name, max_rel_error=worst, passed=worst < tol))
    return reports
