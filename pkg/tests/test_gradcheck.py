import numpy as np
import pytest

from proxyforge.losses import LOSS_NAMES, LossHyperparams
from proxyforge.losses.gradcheck import check_gradients, finite_difference_gradient, relative_error


def test_linear_function_exact():
    w = np.array([1.5, -2.0, 0.25])
    grads = finite_difference_gradient(lambda d: float(w @ d["x"]), {"x": np.array([0.3, 0.1, -4.0])}, 1e-5)
    np.testing.assert_allclose(grads["x"], w, atol=1e-9)


def test_constant_function_zero():
    grads = finite_difference_gradient(lambda d: 3.0, {"x": np.ones((2, 2)), "y": 1.0}, 1e-5)
    assert np.all(grads["x"] == 0.0) and grads["y"] == 0.0


def test_quadratic_at_one():
    grads = finite_difference_gradient(lambda d: float(d["x"] ** 2), {"x": 1.0}, 1e-4)
    assert float(grads["x"]) == pytest.approx(2.0, abs=1e-7)


def test_inputs_not_modified():
    x = np.array([1.0, 2.0])
    finite_difference_gradient(lambda d: float(np.sum(d["x"] ** 3)), {"x": x}, 1e-5)
    assert x.tolist() == [1.0, 2.0]


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        finite_difference_gradient(lambda d: 0.0, {"x": 1.0}, 0.0)


def test_relative_error_floor():
    assert relative_error([0.0], [1e-9]) == pytest.approx(1e-5)
    assert relative_error([2.0, 1.0], [2.0, 1.1]) == pytest.approx(0.05)


@pytest.mark.parametrize("name", LOSS_NAMES)
def test_analytic_gradients_quick(name):
    report = check_gradients(name, seed=123, trials=2)
    assert max(report.values()) < 1e-4, report


@pytest.mark.parametrize("lam", [0.0, 0.5])
@pytest.mark.parametrize("name", ["mp", "mmp"])
def test_masked_losses_gradients_other_lambdas(name, lam):
    report = check_gradients(name, seed=5, trials=2, hyper=LossHyperparams(lambda_balance=lam))
    assert max(report.values()) < 1e-4, report
