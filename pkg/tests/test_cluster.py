import numpy as np
import pytest
from scipy.spatial.distance import cdist
from hypothesis import given, settings, strategies as st
from sklearn.cluster import HDBSCAN as SkHDBSCAN

from activepaths.cluster import (
    NOISE, center_kernel, cluster_value_census, compare_clusters, cosine_kernel, fix_signs, hdbscan,
    jacobi_eigh, kernel_pca, largest_cluster,
)


def kpca_oracle(C, d):
    lam, vecs = np.linalg.eigh(center_kernel(cosine_kernel(C)))
    order = np.argsort(-lam)[:d]
    return fix_signs(vecs[:, order] * np.sqrt(lam[order]))


def test_jacobi_matches_eigh(rng):
    for n in (1, 2, 5, 12):
        B = rng.normal(size=(n, n))
        A = B + B.T
        w, V = jacobi_eigh(A)
        assert np.allclose(w, np.sort(np.linalg.eigvalsh(A))[::-1], atol=1e-10)
        assert np.allclose(A @ V, V * w, atol=1e-9)


def test_jacobi_rejects_asymmetric():
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("n,p", [(30, 8), (6, 10)])
def test_kpca_matches_dense_oracle(rng, n, p):
    C = rng.normal(size=(n, p))
    E = kernel_pca(C, 3)
    assert np.allclose(E.coords, kpca_oracle(C, 3), atol=1e-8)


def test_kpca_ignores_row_scale(rng):
    C = rng.normal(size=(40, 6))
    a = kernel_pca(C, 2).coords
    b = kernel_pca(C * rng.uniform(0.1, 10, size=(40, 1)), 2).coords
    assert np.allclose(a, b, atol=1e-9)


def test_kpca_drops_null_directions():
    C = np.repeat(np.eye(3)[:2], 5, axis=0)
    E = kernel_pca(C, 4)
    assert E.dim == 1


def test_kpca_zero_rows_allowed():
    C = np.vstack([np.zeros((3, 4)), np.eye(4)])
    assert np.isfinite(kernel_pca(C, 2).coords).all()


def test_hdbscan_small_input_all_noise():
    a = hdbscan(np.zeros((10, 2)), 50)
    assert (a.labels == NOISE).all() and a.n_clusters == 0


def test_hdbscan_single_blob_needs_allow_single_cluster(rng):
    X = np.vstack([np.zeros((50, 2)), [[10.0, 10.0]]])
    assert hdbscan(X, 5).n_clusters == 0
    a = hdbscan(X, 5, allow_single_cluster=True)
    assert a.n_clusters == 1 and a.labels[-1] == NOISE


def tied_points(X, k):
    """Points with several equally short mutual-reachability edges; their
    attachment depends on how MST ties are broken."""
    core = np.sort(cdist(X, X), axis=1)[:, k - 1]
    M = np.maximum(np.maximum(core[:, None], core[None, :]), cdist(X, X))
    np.fill_diagonal(M, np.inf)
    return np.flatnonzero((M <= M.min(axis=1, keepdims=True) + 1e-12).sum(axis=1) > 1)


@pytest.mark.parametrize("seed", range(8))
def test_hdbscan_matches_sklearn(seed):
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-10, 10, size=(3, 2))
    X = np.vstack([c + rng.normal(size=(60, 2)) for c in centres] + [rng.uniform(-15, 15, size=(20, 2))])
    ours = hdbscan(X, 15).labels
    ref = SkHDBSCAN(min_cluster_size=15, copy=True).fit(X).labels_
    assert len(set(ours.tolist())) == len(set(ref.tolist()))
    # relabel ours onto sklearn's ids by majority, then compare
    mapping = {c: np.bincount(ref[ours == c] + 1).argmax() - 1 for c in set(ours.tolist()) - {NOISE}}
    mapped = np.array([mapping.get(c, NOISE) for c in ours])
    differ = np.flatnonzero(mapped != ref)
    assert set(differ.tolist()) <= set(tied_points(X, 15).tolist())
    assert differ.size <= 0.01 * len(X)


def test_compare_clusters_ranks_planted_feature():
    C = np.zeros((30, 3))
    lab = np.array([0] * 20 + [1] * 10)
    C[20:, 2] = 4.0
    C[20:, 1] = 1.0
    rep = compare_clusters(lab, C)
    assert rep.largest_cluster_id == 0 and rep.compared_cluster_ids == (1,)
    assert rep.sorted_contr_inds[:, 0].tolist() == [2, 1, 0]
    assert rep.diff_contr_list[:, 0].tolist() == [0.0, 1.0, 16.0]


def test_compare_clusters_skips_noise_and_breaks_size_ties_low():
    lab = np.array([NOISE, 1, 1, 0, 0, 2])
    assert largest_cluster(lab) == 0
    rep = compare_clusters(lab, np.arange(18, dtype=float).reshape(6, 3))
    assert rep.compared_cluster_ids == (1, 2)


def test_census_counts_raw_values():
    out = cluster_value_census(np.array([0, 0, 1, 1, 1]), {"t": np.array([63.0, 64, 66, 66, 66])}, "t")
    assert out == {0: {63: 1, 64: 1}, 1: {66: 3}}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 12))
def test_jacobi_property(seed, n):
    B = np.random.default_rng(seed).normal(size=(n, n))
    A = B @ B.T
    w, V = jacobi_eigh(A)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-9)
    assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-8 * max(1.0, np.abs(A).max()))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hdbscan_labels_are_consistent(seed):
    X = np.random.default_rng(seed).normal(size=(80, 2))
    a = hdbscan(X, 10)
    ids = sorted(set(a.labels.tolist()) - {NOISE})
    assert ids == list(range(a.n_clusters))
    assert all(a.sizes[c] >= 10 for c in ids)
