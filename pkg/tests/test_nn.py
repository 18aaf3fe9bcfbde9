import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activepaths import nn
from conftest import random_net


def test_forward_matches_manual_affine_chain(rng):
    net = random_net(rng, [4, 3, 1])
    x = rng.normal(size=4)
    h1 = np.maximum(x @ net.weights[0] + net.biases[0], 0)
    z = h1 @ net.weights[1] + net.biases[1]
    y, trace = nn.forward(net, x)
    assert trace.output_preactivation == pytest.approx(z[0])
    assert y == pytest.approx(1 / (1 + np.exp(-z[0])))


def test_shape_errors(rng):
    net = random_net(rng, [4, 3, 1])
    with pytest.raises(nn.ShapeError):
        nn.forward(net, np.zeros(5))
    with pytest.raises(nn.ShapeError):
        nn.predict_batch(net, np.zeros((2, 3)))
    with pytest.raises(nn.ShapeError):
        nn.Network((np.zeros((3, 2)),), (np.zeros(2),))


def test_non_piecewise_linear_activation_rejected():
    with pytest.raises(ValueError, match="piecewise linear"):
        nn.Network((np.zeros((2, 1)),), (np.zeros(1),), hidden_activation="tanh")


def test_corrupt_network_refuses_forward():
    net = nn.Network((np.array([[np.nan], [0.0]]),), (np.zeros(1),))
    with pytest.raises(nn.CorruptModelError):
        nn.forward(net, np.zeros(2))


def test_zero_weights_touches_only_masked_entries(rng):
    net = random_net(rng, [3, 4, 1])
    mask = [np.zeros((3, 4), dtype=np.uint8), np.zeros((4, 1), dtype=np.uint8)]
    mask[0][1, 2] = 1
    out = nn.zero_weights(net, mask)
    assert out.weights[0][1, 2] == 0.0
    changed = out.weights[0] != net.weights[0]
    assert changed.sum() <= 1
    assert all(np.array_equal(a, b) for a, b in zip(out.biases, net.biases))


def test_default_widths_near_budget():
    w = nn.default_hidden_widths(33)
    dims = [33, *w, 1]
    count = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    assert w[0] == 2 * w[1] == 4 * w[2]
    assert abs(count - 10_500) < 1_000


def test_serialize_roundtrip_and_corruption(rng):
    net = random_net(rng, [5, 4, 3, 1])
    blob = nn.serialize(net)
    assert blob[:4] == b"APNN"
    assert nn.deserialize(blob).equals(net)
    with pytest.raises(nn.ModelFormatError):
        nn.deserialize(b"XXXX" + blob[4:])
    with pytest.raises(nn.ModelFormatError):
        nn.deserialize(blob[:-8])


def test_training_learns_separable_problem_and_is_deterministic():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(600, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    cfg = nn.TrainConfig(epochs=15, seed=3, learning_rate=1e-2)
    nets = [nn.train(nn.init_network([4, 8, 1], seed=3), (X[:500], y[:500]), (X[500:], y[500:]), cfg)
            for _ in range(2)]
    assert nn.serialize(nets[0]) == nn.serialize(nets[1])
    acc = ((nn.predict_batch(nets[0], X[500:])[0] > 0.5) == y[500:]).mean()
    assert acc > 0.9


def test_early_stopping_returns_best_epoch_snapshot():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 3))
    y = rng.integers(0, 2, 200).astype(float)
    hist = nn.TrainHistory()
    net = nn.train(nn.init_network([3, 16, 1], seed=1), (X[:100], y[:100]), (X[100:], y[100:]),
                   nn.TrainConfig(epochs=30, patience=2, seed=1, learning_rate=1e-2), history=hist)
    best = nn.bce_from_logits(nn.predict_logits(net, X[100:]), y[100:])
    assert best == pytest.approx(min(hist.val_loss))
    assert len(hist.val_loss) < 30


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(0, 2**31 - 1))
def test_serialize_roundtrip_property(hidden, seed):
    net = random_net(np.random.default_rng(seed), [3, *hidden, 1])
    assert nn.deserialize(nn.serialize(net)).equals(net)
