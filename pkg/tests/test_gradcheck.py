"""The checker itself: exactness on quadratics, sensitivity to corruption."""

import numpy as np
import pytest

from mage.errors import UsageError
from mage.gradcheck import finite_diff_grad_check
from mage.layers import Mlp, linear
from mage.losses import mse_loss
from mage.rng import Rng


def test_quadratic_is_exact_under_central_differences():
    # f(p) = p^2 has zero third derivative, so the central difference is exact
    def fn(params):
        p = params["p"][0]
        return p * p, {"p": np.array([2.0 * p])}

    report = finite_diff_grad_check(fn, {"p": np.array([3.0])}, h=1e-5, tol=1e-9)
    assert report.passed
    assert report.max_rel_error < 1e-9


def test_linear_layer_with_mse_is_tight():
    rng = Rng(99)
    mlp = Mlp.init([linear(4, 3)], rng.child("init"))
    x = rng.child("x").normal((5, 4))
    target = rng.child("t").normal((5, 3))

    def fn(params):
        model = Mlp(mlp.specs, params, mlp.stats)
        y, cache = model.forward(x, mode="train")
        loss, grad = mse_loss(y, target)
        _, grads = model.backward(cache, grad)
        return loss, grads

    report = finite_diff_grad_check(fn, mlp.params, h=1e-5, tol=1e-6)
    assert report.passed, str(report)


def test_corrupted_gradient_fails_the_check():
    def fn(params):
        p = params["p"]
        return float(np.sum(np.sin(p))), {"p": np.cos(p) * 1.01}

    report = finite_diff_grad_check(fn, {"p": np.array([0.3, 1.1])}, h=1e-5, tol=1e-5)
    assert not report.passed


def test_non_deterministic_fn_rejected():
    state = {"n": 0}

    def fn(params):
        state["n"] += 1
        return float(params["p"][0]) + state["n"] * 1e-3, {"p": np.array([1.0])}

    with pytest.raises(UsageError, match="deterministic"):
        finite_diff_grad_check(fn, {"p": np.array([1.0])})


def test_component_cap_still_checks_something():
    def fn(params):
        p = params["p"]
        return float(np.sum(p**2)), {"p": 2.0 * p}

    report = finite_diff_grad_check(fn, {"p": np.arange(100.0)}, max_components=10)
    assert report.passed
