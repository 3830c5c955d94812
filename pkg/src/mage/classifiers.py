"""Classification heads and their training loops.

Two heads mirror the evaluation protocol: a single-layer LSTM consuming
the view stack as a sequence (or the fused attention output as a
length-1 sequence), and softmax regression consuming concatenated views
(fit with L-BFGS) or the attention output (fit jointly with Adam, since
L-BFGS over the non-convex attention composite has no convexity to
exploit).

All gradient-descent training shares one early-stopping loop: step-decay
learning rate, patience on validation loss, parameters restored from the
best validation epoch. Joint models backpropagate classification loss
through the classifier into the attention projections and context
vectors; augmenter views are constants.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .attention import MageParams, mage_backward, mage_forward
from .augment import ViewStack
from .errors import ShapeError, UsageError
from .losses import cross_entropy_loss, softmax
from .optim import Adam, LbfgsConfig, StepDecaySchedule, lbfgs_minimize, step_decay_lr
from .rng import Rng

__all__ = [
    "LstmParams",
    "lstm_init",
    "lstm_forward",
    "lstm_backward",
    "TrainConfig",
    "TrainEpoch",
    "train_lstm",
    "SoftmaxModel",
    "train_softmax",
    "train_softmax_adam",
    "softmax_objective",
    "JointModel",
    "train_joint",
    "predict_softmax",
    "predict_lstm",
    "predict_joint",
]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    """Single-layer LSTM with stacked gate matrices (order i, f, g, o)."""

    input_dim: int
    hidden_dim: int
    num_classes: int
    wx: np.ndarray  # (4h, input_dim)
    wh: np.ndarray  # (4h, hidden_dim)
    b: np.ndarray  # (4h,)
    why: np.ndarray  # (num_classes, hidden_dim)
    by: np.ndarray  # (num_classes,)

    def as_dict(self) -> dict:
        return {"wx": self.wx, "wh": self.wh, "b": self.b, "why": self.why, "by": self.by}

    def copy(self) -> "LstmParams":
        return LstmParams(
            self.input_dim,
            self.hidden_dim,
            self.num_classes,
            self.wx.copy(),
            self.wh.copy(),
            self.b.copy(),
            self.why.copy(),
            self.by.copy(),
        )


def lstm_init(input_dim: int, hidden_dim: int, num_classes: int, rng: Rng) -> LstmParams:
    """Scaled-uniform weights; forget-gate bias starts at 1."""
    h = hidden_dim

    def uniform(shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, shape)

    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0
    return LstmParams(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        num_classes=num_classes,
        wx=uniform((4 * h, input_dim), input_dim, h),
        wh=uniform((4 * h, h), h, h),
        b=b,
        why=uniform((num_classes, h), h, num_classes),
        by=np.zeros(num_classes),
    )


def lstm_forward(params: LstmParams, seqs: np.ndarray):
    """Unroll the recurrence over ``(batch, time, input_dim)`` sequences.

    Returns ``(logits, final_hidden, cache)``.
    """
    seqs = np.asarray(seqs, dtype=np.float64)
    if seqs.ndim != 3:
        raise ShapeError(f"sequences must be (batch, time, dim), got {seqs.shape}")
    n, T, d = seqs.shape
    if T == 0:
        raise UsageError("empty sequence")
    if d != params.input_dim:
        raise ShapeError(f"sequence dim {d} != lstm input dim {params.input_dim}")
    h_dim = params.hidden_dim
    h = np.zeros((n, h_dim))
    c = np.zeros((n, h_dim))
    steps = []
    for t in range(T):
        x_t = seqs[:, t]
        z = x_t @ params.wx.T + h @ params.wh.T + params.b
        i = _sigmoid(z[:, :h_dim])
        f = _sigmoid(z[:, h_dim : 2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
        o = _sigmoid(z[:, 3 * h_dim :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append((x_t, h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new
    logits = h @ params.why.T + params.by
    cache = (seqs.shape, steps, h)
    return logits, h, cache


def lstm_backward(params: LstmParams, cache, grad_logits: np.ndarray):
    """Backpropagation through time; returns ``(grads, grad_seqs)``."""
    (n, T, d), steps, h_final = cache
    h_dim = params.hidden_dim
    grads = {name: np.zeros_like(arr) for name, arr in params.as_dict().items()}
    grads["why"] += grad_logits.T @ h_final
    grads["by"] += grad_logits.sum(axis=0)
    dh = grad_logits @ params.why
    dc = np.zeros((n, h_dim))
    grad_seqs = np.zeros((n, T, d))
    for t in reversed(range(T)):
        x_t, h_prev, c_prev, i, f, g, o, tanh_c = steps[t]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc = dc * f
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - g**2), do * o * (1 - o)], axis=1
        )
        grads["wx"] += dz.T @ x_t
        grads["wh"] += dz.T @ h_prev
        grads["b"] += dz.sum(axis=0)
        grad_seqs[:, t] = dz @ params.wx
        dh = dz @ params.wh
    return grads, grad_seqs


@dataclass(frozen=True)
class TrainConfig:
    """Shared gradient-training settings: Adam + step decay + patience."""

    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 3
    lr_step_size: int = 5
    lr_gamma: float = 0.5
    attention_lr_factor: float = 1.0  # 0 freezes the attention parameters

    def __post_init__(self):
        if self.patience < 1:
            raise UsageError(f"patience must be >= 1, got {self.patience}")


@dataclass(frozen=True)
class TrainEpoch:
    train_loss: float
    val_loss: float
    lr: float
    attention_means: tuple | None = None  # epoch-mean view weight per view


def _early_stopping_loop(model, train_xy, val_xy, config: TrainConfig, rng: Rng):
    """Epoch loop shared by every gradient-trained classifier.

    ``model`` exposes train_step(xb, yb, lr) -> (loss, extra),
    eval_loss(x, y) -> float, snapshot() and restore(snapshot).
    Stops after ``patience`` consecutive epochs without a validation
    improvement and restores the best-validation parameters.
    """
    x_train, y_train = train_xy
    x_val, y_val = val_xy
    if len(y_val) == 0:
        raise UsageError("validation set is empty")
    if config.learning_rate > 0:
        schedule = StepDecaySchedule(config.learning_rate, config.lr_step_size, config.lr_gamma)
        lr_at = lambda epoch: step_decay_lr(schedule, epoch)
    else:  # frozen training (used by plateau/ablation checks)
        lr_at = lambda epoch: 0.0
    shuffle_rng = rng.child("shuffle")
    n = len(y_train)
    history: list[TrainEpoch] = []
    best_val = np.inf
    best_snapshot = model.snapshot()
    bad_epochs = 0
    for epoch in range(config.max_epochs):
        lr = lr_at(epoch)
        order = shuffle_rng.permutation(n)
        losses, extras = [], []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, extra = model.train_step(x_train[idx], y_train[idx], lr)
            losses.append(loss)
            if extra is not None:
                extras.append(extra)
        val_loss = model.eval_loss(x_val, y_val)
        attention = tuple(np.mean(extras, axis=0)) if extras else None
        history.append(
            TrainEpoch(
                train_loss=float(np.mean(losses)),
                val_loss=float(val_loss),
                lr=lr,
                attention_means=attention,
            )
        )
        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = model.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    model.restore(best_snapshot)
    return history


class _LstmClassifier:
    """Plain LSTM over sequences; the no-attention sequential head."""

    def __init__(self, params: LstmParams, learning_rate: float):
        self.params = params
        self.opt = Adam(learning_rate)

    def train_step(self, xb, yb, lr):
        logits, _, cache = lstm_forward(self.params, xb)
        loss, grad = cross_entropy_loss(logits, yb)
        grads, _ = lstm_backward(self.params, cache, grad)
        self.opt.step(self.params.as_dict(), grads, lr=lr)
        return loss, None

    def eval_loss(self, x, y):
        logits, _, _ = lstm_forward(self.params, x)
        loss, _ = cross_entropy_loss(logits, y)
        return loss

    def snapshot(self):
        return self.params.copy()

    def restore(self, snapshot):
        self.params = snapshot


def train_lstm(train, val, hidden_dim: int, num_classes: int, config: TrainConfig, rng: Rng):
    """Train the LSTM head with early stopping on the validation loss.

    ``train`` and ``val`` are ``(sequences, labels)`` pairs. Returns
    ``(params, history)`` with parameters from the best validation epoch.
    """
    x_train, y_train = train
    x_train = np.asarray(x_train, dtype=np.float64)
    params = lstm_init(x_train.shape[2], hidden_dim, num_classes, rng.child("init"))
    model = _LstmClassifier(params, config.learning_rate)
    history = _early_stopping_loop(model, (x_train, np.asarray(y_train)), val, config, rng)
    return model.params, history


@dataclass
class SoftmaxModel:
    """Multinomial logistic regression: logits = x @ w.T + b."""

    weights: np.ndarray  # (num_classes, feature_dim)
    bias: np.ndarray  # (num_classes,)
    l2: float = 1e-4

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.weights.shape[1]:
            raise ShapeError(
                f"features shape {features.shape} does not match weights {self.weights.shape}"
            )
        return features @ self.weights.T + self.bias

    def copy(self) -> "SoftmaxModel":
        return SoftmaxModel(self.weights.copy(), self.bias.copy(), self.l2)


def softmax_objective(features: np.ndarray, labels: np.ndarray, l2: float, num_classes: int):
    """Flat-vector objective for L-BFGS: mean CE + (l2/2) ||W||^2 (bias free)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n, d = features.shape

    def objective(theta: np.ndarray):
        w = theta[: num_classes * d].reshape(num_classes, d)
        b = theta[num_classes * d :]
        logits = features @ w.T + b
        loss, grad_logits = cross_entropy_loss(logits, labels)
        loss += 0.5 * l2 * float(np.sum(w**2))
        grad_w = grad_logits.T @ features + l2 * w
        grad_b = grad_logits.sum(axis=0)
        return loss, np.concatenate([grad_w.ravel(), grad_b])

    return objective


def train_softmax(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 1e-4,
    config: LbfgsConfig = LbfgsConfig(),
    num_classes: int = 3,
    x0: np.ndarray | None = None,
):
    """Fit softmax regression with L-BFGS; returns (model, iterations, grad_norm).

    With ``l2 > 0`` the objective is convex with a unique weight optimum,
    so the fit is reproducible and initialization-independent.
    """
    features = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise UsageError("features contain non-finite values")
    n, d = features.shape
    objective = softmax_objective(features, labels, l2, num_classes)
    if x0 is None:
        x0 = np.zeros(num_classes * d + num_classes)
    theta, iterations, grad_norm = lbfgs_minimize(objective, x0, config)
    model = SoftmaxModel(
        weights=theta[: num_classes * d].reshape(num_classes, d).copy(),
        bias=theta[num_classes * d :].copy(),
        l2=l2,
    )
    return model, iterations, grad_norm


class _SoftmaxAdam:
    """Zero-initialized linear head trained by Adam on fixed features."""

    def __init__(self, feature_dim: int, num_classes: int, learning_rate: float):
        self.clf = SoftmaxModel(weights=np.zeros((num_classes, feature_dim)), bias=np.zeros(num_classes))
        self.opt = Adam(learning_rate)

    def train_step(self, xb, yb, lr):
        logits = self.clf.logits(xb)
        loss, grad_logits = cross_entropy_loss(logits, yb)
        grads = {"w": grad_logits.T @ xb, "b": grad_logits.sum(axis=0)}
        self.opt.step({"w": self.clf.weights, "b": self.clf.bias}, grads, lr=lr)
        return loss, None

    def eval_loss(self, x, y):
        loss, _ = cross_entropy_loss(self.clf.logits(x), y)
        return loss

    def snapshot(self):
        return self.clf.copy()

    def restore(self, snapshot):
        self.clf = snapshot


def train_softmax_adam(train, val, config: TrainConfig, rng: Rng, num_classes: int = 3):
    """Adam-fit softmax head on precomputed features (the frozen-attention
    counterpart of the joint softmax track). Returns (model, history)."""
    x_train, y_train = train
    x_train = np.asarray(x_train, dtype=np.float64)
    model = _SoftmaxAdam(x_train.shape[1], num_classes, config.learning_rate)
    history = _early_stopping_loop(model, (x_train, np.asarray(y_train)), val, config, rng)
    return model.clf, history


def _stack_data(stacks) -> np.ndarray:
    if isinstance(stacks, ViewStack):
        return stacks.data
    data = np.asarray(stacks, dtype=np.float64)
    if data.ndim != 3:
        raise ShapeError(f"stacks must be (samples, views, dim), got {data.shape}")
    return data


class JointModel:
    """Attention fused with a classification head, trained end to end.

    ``head`` is either "softmax" (linear head, zero-initialized) or
    "lstm" (the fused vector fed as a length-1 sequence). The attention
    parameters and the head are updated by separate Adam instances so the
    attention learning rate can be scaled (or zeroed to freeze it).
    """

    def __init__(self, mage: MageParams, head: str, num_classes: int, rng: Rng,
                 learning_rate: float = 0.001, hidden_dim: int = 128,
                 attention_lr_factor: float = 1.0):
        self.mage = mage
        self.head = head
        self.attention_lr_factor = attention_lr_factor
        if head == "softmax":
            self.clf = SoftmaxModel(
                weights=np.zeros((num_classes, mage.model_dim)), bias=np.zeros(num_classes)
            )
        elif head == "lstm":
            self.clf = lstm_init(mage.model_dim, hidden_dim, num_classes, rng.child("clf"))
        else:
            raise UsageError(f"unknown head {head!r}")
        self.opt_mage = Adam(learning_rate)
        self.opt_clf = Adam(learning_rate)

    def _head_forward(self, fused: np.ndarray):
        if self.head == "softmax":
            return self.clf.logits(fused), None
        logits, _, cache = lstm_forward(self.clf, fused[:, None, :])
        return logits, cache

    def train_step(self, xb, yb, lr):
        fused, trace, cache = mage_forward(self.mage, xb)
        logits, head_cache = self._head_forward(fused)
        loss, grad_logits = cross_entropy_loss(logits, yb)
        if self.head == "softmax":
            grad_w = grad_logits.T @ fused
            grad_b = grad_logits.sum(axis=0)
            grad_fused = grad_logits @ self.clf.weights
            self.opt_clf.step(
                {"w": self.clf.weights, "b": self.clf.bias}, {"w": grad_w, "b": grad_b}, lr=lr
            )
        else:
            grads, grad_seqs = lstm_backward(self.clf, head_cache, grad_logits)
            grad_fused = grad_seqs[:, 0]
            self.opt_clf.step(self.clf.as_dict(), grads, lr=lr)
        mage_grads, _ = mage_backward(self.mage, cache, grad_fused)
        self.opt_mage.step(
            self.mage.as_dict(), mage_grads, lr=lr * self.attention_lr_factor
        )
        return loss, trace.weights.mean(axis=(0, 1))

    def eval_loss(self, x, y):
        fused, _, _ = mage_forward(self.mage, x)
        logits, _ = self._head_forward(fused)
        loss, _ = cross_entropy_loss(logits, y)
        return loss

    def snapshot(self):
        clf = self.clf.copy() if isinstance(self.clf, (SoftmaxModel, LstmParams)) else self.clf
        return (self.mage.w.copy(), self.mage.c.copy(), clf)

    def restore(self, snapshot):
        w, c, clf = snapshot
        self.mage = replace(self.mage, w=w, c=c)
        self.clf = clf


def train_joint(mage: MageParams, head: str, stacks, labels, val_stacks, val_labels,
                config: TrainConfig, rng: Rng, num_classes: int = 3, hidden_dim: int = 128):
    """Jointly train attention + classifier on view stacks.

    Returns ``(model, history)``; history entries carry the epoch-mean
    attention weight per view, which is what the selectivity experiments
    read.
    """
    data = _stack_data(stacks)
    val_data = _stack_data(val_stacks)
    model = JointModel(
        mage,
        head,
        num_classes,
        rng,
        learning_rate=config.learning_rate,
        hidden_dim=hidden_dim,
        attention_lr_factor=config.attention_lr_factor,
    )
    history = _early_stopping_loop(
        model, (data, np.asarray(labels)), (val_data, np.asarray(val_labels)), config, rng
    )
    return model, history


def predict_softmax(model: SoftmaxModel, features: np.ndarray):
    """Returns (labels, probabilities); ties break toward the lower index."""
    probs = softmax(model.logits(features), axis=1)
    return probs.argmax(axis=1), probs


def predict_lstm(params: LstmParams, seqs: np.ndarray):
    logits, _, _ = lstm_forward(params, seqs)
    probs = softmax(logits, axis=1)
    return probs.argmax(axis=1), probs


def predict_joint(model: JointModel, stacks):
    fused, _, _ = mage_forward(model.mage, _stack_data(stacks))
    logits, _ = model._head_forward(fused)
    probs = softmax(logits, axis=1)
    return probs.argmax(axis=1), probs
