import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activepaths import explain, nn
from conftest import random_net


def path_sum_beta(net, x):
    """Sum over every input-to-output path of weight products, keeping only
    paths whose hidden nodes are all active."""
    _, trace = nn.forward(net, x)
    active = [h > 0 for h in trace.pre_activations[:-1]]
    dims = net.layer_dims
    beta = np.zeros(dims[0])
    for i in range(dims[0]):
        for hidden in itertools.product(*(range(d) for d in dims[1:-1])):
            if not all(active[l][j] for l, j in enumerate(hidden)):
                continue
            nodes = (i, *hidden, 0)
            prod = 1.0
            for l in range(len(nodes) - 1):
                prod *= net.weights[l][nodes[l], nodes[l + 1]]
            beta[i] += prod
    return beta


def test_affine_network_beta_is_weight_vector():
    w = np.array([[0.5], [-2.0], [3.0]])
    net = nn.Network((w,), (np.array([0.7]),))
    _, trace = nn.forward(net, np.array([1.0, 2.0, 3.0]))
    s = explain.slope_coefficients(net, trace)
    assert np.allclose(s.beta, w[:, 0]) and s.intercept == pytest.approx(0.7)


def test_dead_network_has_zero_beta():
    net = nn.Network((np.ones((2, 3)), np.ones((3, 1))), (np.full(3, -100.0), np.zeros(1)))
    _, trace = nn.forward(net, np.array([1.0, 1.0]))
    assert np.all(explain.slope_coefficients(net, trace).beta == 0.0)


def test_beta_matches_path_enumeration(rng):
    for _ in range(20):
        net = random_net(rng, [3, 4, 3, 1])
        x = rng.normal(size=3)
        _, trace = nn.forward(net, x)
        assert np.allclose(explain.slope_coefficients(net, trace).beta, path_sum_beta(net, x), atol=1e-12)


def test_batch_slopes_equal_single_sample(rng):
    net = random_net(rng, [5, 6, 4, 1])
    X = rng.normal(size=(20, 5))
    beta, icpt, _ = explain.batch_slopes(net, X)
    for i in range(20):
        s = explain.slope_coefficients(net, nn.forward(net, X[i])[1])
        assert np.allclose(beta[i], s.beta) and icpt[i] == pytest.approx(s.intercept)


def test_contribution_matrix_csv_roundtrip(rng):
    net = random_net(rng, [3, 4, 1])
    C = explain.contribution_matrix(net, rng.normal(size=(5, 3)), np.arange(10, 15), ("a", "b", "c"))
    back = explain.ContributionMatrix.from_csv(C.to_csv())
    assert np.array_equal(back.values, C.values) and list(back.sample_ids) == list(range(10, 15))


def test_mask_rules():
    w0 = np.array([[1.0, -1.0], [1.0, 1.0]])
    net = nn.Network((w0, np.ones((2, 1))), (np.zeros(2), np.zeros(1)))
    _, trace = nn.forward(net, np.array([2.0, 0.0]))
    m = explain.active_path_mask(net, trace)
    # input 1 is zero so its row is off; hidden 1 has pre-activation -2
    assert m[0].tolist() == [[1, 0], [0, 0]]
    assert m[1].tolist() == [[1], [0]]


def test_trace_from_other_network_rejected(rng):
    a, b = random_net(rng, [3, 2, 1]), random_net(rng, [3, 2, 1])
    _, trace = nn.forward(a, np.ones(3))
    with pytest.raises(nn.ShapeError):
        explain.slope_coefficients(b, trace)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.lists(st.integers(1, 5), min_size=0, max_size=3))
def test_affine_reconstruction_property(seed, hidden):
    rng = np.random.default_rng(seed)
    net = random_net(rng, [4, *hidden, 1])
    x = rng.normal(size=4) * 3
    _, trace = nn.forward(net, x)
    s = explain.slope_coefficients(net, trace)
    h = trace.output_preactivation
    assert s.beta @ x + s.intercept == pytest.approx(h, rel=1e-9, abs=1e-9)
    assert explain.contributions(s, x).sum() == pytest.approx(s.beta @ x, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_mask_only_on_edges_between_active_nodes(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, [4, 3, 2, 1])
    x = rng.normal(size=4) * (rng.random(4) > 0.3)
    _, trace = nn.forward(net, x)
    m = explain.active_path_mask(net, trace)
    acts = explain.node_activity(net, trace)
    for l, layer in enumerate(m):
        assert np.array_equal(layer.astype(bool), np.outer(acts[l], acts[l + 1]))
    assert acts[-1].all()
