"""Forward/backward behaviour of the dense layer kit."""

import numpy as np
import pytest

from mage.errors import ShapeError, UsageError
from mage.gradcheck import finite_diff_grad_check
from mage.layers import Mlp, activation, batch_norm, dropout, linear
from mage.losses import mse_loss
from mage.rng import Rng


def identity_linear(dim):
    mlp = Mlp.init([linear(dim, dim)], Rng(0))
    mlp.params["l0.w"] = np.eye(dim)
    mlp.params["l0.b"] = np.zeros(dim)
    return mlp


class TestForward:
    def test_identity_linear_passes_input_through(self):
        mlp = identity_linear(3)
        x = np.array([[1.0, -2.0, 0.5]])
        y, _ = mlp.forward(x, mode="eval")
        np.testing.assert_allclose(y, x)

    def test_sigmoid_of_zero_is_half(self):
        mlp = Mlp.init([activation("sigmoid")], Rng(0))
        y, _ = mlp.forward(np.zeros((2, 4)), mode="eval")
        np.testing.assert_allclose(y, 0.5)

    def test_linear_then_leaky_relu_hand_case(self):
        # W = I, b = [1, 1]; input [-2, 3] -> pre-activation [-1, 4]
        # leaky(0.01) -> [-0.01, 4]
        mlp = Mlp.init([linear(2, 2), activation("leaky_relu", slope=0.01)], Rng(0))
        mlp.params["l0.w"] = np.eye(2)
        mlp.params["l0.b"] = np.ones(2)
        y, _ = mlp.forward(np.array([[-2.0, 3.0]]), mode="eval")
        np.testing.assert_allclose(y, [[-0.01, 4.0]])

    def test_dimension_mismatch_names_the_layer(self):
        mlp = Mlp.init([linear(4, 2)], Rng(0))
        with pytest.raises(ShapeError, match="layer 0"):
            mlp.forward(np.zeros((1, 3)))

    def test_eval_mode_is_deterministic_with_dropout(self):
        mlp = Mlp.init([linear(4, 4), dropout(0.5)], Rng(0))
        x = Rng(1).normal((8, 4))
        y1, _ = mlp.forward(x, mode="eval")
        y2, _ = mlp.forward(x, mode="eval")
        np.testing.assert_array_equal(y1, y2)


class TestBackward:
    def test_linear_gradients_for_sum_loss(self):
        # loss = sum(Wx + b): grad_b = ones, grad_W = outer(x, ones)
        mlp = Mlp.init([linear(3, 2)], Rng(0))
        x = np.array([[1.0, 2.0, 3.0]])
        y, cache = mlp.forward(x)
        _, grads = mlp.backward(cache, np.ones_like(y))
        np.testing.assert_allclose(grads["l0.b"], np.ones(2))
        np.testing.assert_allclose(grads["l0.w"], np.outer(x[0], np.ones(2)))

    def test_dropout_rate_zero_is_identity_in_backward(self):
        mlp = Mlp.init([dropout(0.0)], Rng(0))
        x = Rng(2).normal((4, 3))
        _, cache = mlp.forward(x, mode="train", rng=Rng(3))
        g = Rng(4).normal((4, 3))
        grad_in, _ = mlp.backward(cache, g)
        np.testing.assert_array_equal(grad_in, g)

    def test_eval_cache_rejected(self):
        mlp = Mlp.init([linear(2, 2)], Rng(0))
        _, cache = mlp.forward(np.zeros((1, 2)), mode="eval")
        with pytest.raises(UsageError):
            mlp.backward(cache, np.zeros((1, 2)))


class TestBatchNorm:
    def test_train_mode_normalizes_batch(self):
        # pre scale/shift the output must be ~zero-mean unit-variance per feature
        mlp = Mlp.init([batch_norm(5)], Rng(0))
        x = Rng(5).normal((32, 5)) * 3.0 + 7.0
        y, _ = mlp.forward(x, mode="train")
        assert np.abs(y.mean(axis=0)).max() < 1e-6
        assert np.abs(y.var(axis=0) - 1.0).max() < 1e-4

    def test_eval_uses_running_stats(self):
        mlp = Mlp.init([batch_norm(3)], Rng(0))
        x = Rng(6).normal((16, 3)) * 2.0 + 1.0
        _, cache = mlp.forward(x, mode="train")
        mlp.commit_stats(cache, momentum=1.0)  # adopt the batch stats outright
        y, _ = mlp.forward(x, mode="eval")
        assert np.abs(y.mean(axis=0)).max() < 0.05

    def test_forward_does_not_mutate_running_stats(self):
        mlp = Mlp.init([batch_norm(3)], Rng(0))
        before = {k: v.copy() for k, v in mlp.stats.items()}
        mlp.forward(Rng(7).normal((8, 3)), mode="train")
        for k in before:
            np.testing.assert_array_equal(mlp.stats[k], before[k])


class TestDropout:
    def test_inverted_scaling_preserves_expectation(self):
        rate = 0.3
        mlp = Mlp.init([dropout(rate)], Rng(0))
        x = np.ones((1, 20000))
        y, _ = mlp.forward(x, mode="train", rng=Rng(11))
        assert y.mean() == pytest.approx(1.0, abs=0.02)

    def test_eval_mode_is_exact_identity(self):
        mlp = Mlp.init([dropout(0.7)], Rng(0))
        x = Rng(8).normal((5, 6))
        y, _ = mlp.forward(x, mode="eval")
        np.testing.assert_array_equal(y, x)

    def test_train_mode_without_rng_rejected(self):
        mlp = Mlp.init([dropout(0.5)], Rng(0))
        with pytest.raises(UsageError):
            mlp.forward(np.zeros((2, 2)), mode="train")


def _check_chain(specs, in_dim, seed, batch=4):
    """Gradient-check an arbitrary chain against MSE to a fixed target."""
    rng = Rng(seed)
    mlp = Mlp.init(specs, rng.child("init"))
    x = rng.child("x").normal((batch, in_dim))
    out_dim = mlp.out_dim or in_dim
    target = rng.child("t").normal((batch, out_dim))

    def fn(params):
        model = Mlp(specs, params, mlp.stats)
        y, cache = model.forward(x, mode="train", rng=Rng(seed + 99))
        loss, grad = mse_loss(y, target)
        _, grads = model.backward(cache, grad)
        return loss, grads

    return finite_diff_grad_check(fn, mlp.params, h=1e-5, tol=1e-5)


@pytest.mark.parametrize("seed", range(10))
def test_gradients_of_mixed_chain_match_central_differences(seed):
    specs = [
        linear(5, 4),
        batch_norm(4),
        activation("leaky_relu"),
        dropout(0.4),
        linear(4, 3),
        activation("sigmoid"),
    ]
    report = _check_chain(specs, in_dim=5, seed=seed)
    assert report.passed, str(report)


@pytest.mark.parametrize("act", ["relu", "tanh", "sigmoid", "identity", "leaky_relu"])
def test_each_activation_has_sound_gradients(act):
    specs = [linear(4, 4), activation(act), linear(4, 2)]
    report = _check_chain(specs, in_dim=4, seed=123)
    assert report.passed, str(report)


def test_same_seed_gives_identical_forward_results():
    specs = [linear(6, 5), batch_norm(5), activation("leaky_relu"), dropout(0.5), linear(5, 2)]
    x = Rng(42).normal((8, 6))
    runs = []
    for _ in range(2):
        mlp = Mlp.init(specs, Rng(9))
        y, _ = mlp.forward(x, mode="train", rng=Rng(10))
        runs.append(y)
    np.testing.assert_array_equal(runs[0], runs[1])
