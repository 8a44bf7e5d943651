import numpy as np
import pytest

from decentgrad.mlp import (
    MlpSpec,
    forward,
    loss_and_subgrad,
    loss_value,
    min_preactivation_gap,
    synthetic_classification,
    synthetic_regression,
)
from decentgrad.oracle import finite_difference_gradient, relu_mlp_loss_and_subgrad
from decentgrad.streams import data_stream

KINK_MARGIN = 1e-4


def test_param_count_and_packing():
    spec = MlpSpec(8, 16, 1)
    assert spec.n_params == 16 * 8 + 16 + 1 * 16 + 1
    rng = np.random.default_rng(0)
    theta = rng.standard_normal(spec.n_params)
    w1, b1, w2, b2 = spec.unpack(theta)
    np.testing.assert_array_equal(spec.pack(w1, b1, w2, b2), theta)


def test_zero_network_zero_targets():
    spec = MlpSpec(3, 4, 2)
    theta = np.zeros(spec.n_params)
    x = np.random.default_rng(1).standard_normal((5, 3))
    loss, grad = loss_and_subgrad(spec, theta, x, np.zeros((5, 2)))
    assert loss == 0.0
    np.testing.assert_array_equal(grad, np.zeros(spec.n_params))


def test_hand_chain_rule_single_unit():
    # scalar network, positive pre-activation: symbolic differentiation by hand
    spec = MlpSpec(1, 1, 1)
    theta = np.array([0.5, 0.1, 2.0, -0.3])  # w1, b1, w2, b2
    x = np.array([[2.0]])
    y = np.array([[1.0]])
    # pre = 1.1, hidden = 1.1, yhat = 1.9, err = 0.9, loss = 0.405
    loss, grad = loss_and_subgrad(spec, theta, x, y)
    assert loss == pytest.approx(0.405)
    np.testing.assert_allclose(grad, [3.6, 1.8, 0.99, 0.9])


def test_relu_zero_preactivation_selects_zero():
    spec = MlpSpec(1, 1, 1)
    theta = np.array([1.0, 0.0, 3.0, 0.0])  # pre-activation 0 at x=0
    _, grad = loss_and_subgrad(spec, theta, np.array([[0.0]]), np.array([[1.0]]))
    # gradient flows to w2 (via hidden=0 -> 0) and b2 only
    np.testing.assert_allclose(grad, [0.0, 0.0, 0.0, -1.0])


def test_forward_shapes_and_loss_value():
    spec = MlpSpec(4, 6, 2)
    rng = np.random.default_rng(3)
    theta = spec.init_params(rng)
    x = rng.standard_normal((7, 4))
    out = forward(spec, theta, x)
    assert out.shape == (7, 2)
    y = rng.standard_normal((7, 2))
    l1, g = loss_and_subgrad(spec, theta, x, y)
    assert l1 == pytest.approx(loss_value(spec, theta, x, y))
    assert g.shape == (spec.n_params,)


def test_shape_mismatch_raises():
    spec = MlpSpec(3, 4, 1)
    rng = np.random.default_rng(4)
    with pytest.raises(ValueError):
        loss_and_subgrad(spec, np.zeros(spec.n_params - 1), rng.standard_normal((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        loss_and_subgrad(spec, np.zeros(spec.n_params), rng.standard_normal((2, 5)), np.zeros(2))
    with pytest.raises(ValueError):
        loss_and_subgrad(spec, np.zeros(spec.n_params), np.empty((0, 3)), np.zeros(0))


@pytest.mark.parametrize("loss", ["mse", "softmax_ce"])
def test_finite_difference_agreement(loss):
    spec = MlpSpec(3, 5, 2, loss=loss)
    rng = np.random.default_rng(11)
    x = rng.standard_normal((6, 3))
    y = rng.standard_normal((6, 2)) if loss == "mse" else rng.integers(0, 2, size=6)
    checked = 0
    while checked < 25:
        theta = spec.init_params(rng)
        if min_preactivation_gap(spec, theta, x) <= KINK_MARGIN:
            continue
        _, grad = relu_mlp_loss_and_subgrad(spec, theta, x, y)
        fd = finite_difference_gradient(lambda p: loss_value(spec, p, x, y), theta)
        assert np.all(np.abs(grad - fd) <= 1e-5 * (1.0 + np.abs(fd)))
        checked += 1


def test_synthetic_regression_deterministic():
    spec = MlpSpec(8, 16, 1)
    xa, ya = synthetic_regression(spec, 64, data_stream(7))
    xb, yb = synthetic_regression(spec, 64, data_stream(7))
    np.testing.assert_array_equal(xa, xb)
    np.testing.assert_array_equal(ya, yb)
    assert xa.shape == (64, 8) and ya.shape == (64, 1)
    # targets carry signal: they are not identically zero or constant
    assert np.std(ya) > 0.05


def test_synthetic_classification_labels_in_range():
    spec = MlpSpec(4, 8, 3, loss="softmax_ce")
    x, labels = synthetic_classification(spec, 50, data_stream(2))
    assert x.shape == (50, 4)
    assert set(np.unique(labels)).issubset({0, 1, 2})
