"""HDBSCAN: mutual-reachability MST, single-linkage hierarchy, condensed
tree and excess-of-mass cluster selection.

Core distance of a point is the distance to its k-th nearest neighbour
counting the point itself, with ``k = min_samples`` (defaults to
``min_cluster_size``).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    sizes: dict

    @classmethod
    def from_labels(cls, labels) -> "ClusterAssignment":
        labels = np.asarray(labels, dtype=np.int64)
        ids, counts = np.unique(labels, return_counts=True)
        return cls(labels, int((ids >= 0).sum()), {int(i): int(c) for i, c in zip(ids, counts)})


def _points(E) -> np.ndarray:
    X = np.asarray(getattr(E, "coords", E), dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D point array, got {X.shape}")
    if X.shape[1] == 0:
        X = np.zeros((X.shape[0], 1))
    return X


def core_distances(X: np.ndarray, k: int) -> np.ndarray:
    if k <= 1:
        return np.zeros(X.shape[0])
    k = min(k, X.shape[0])
    dist, _ = cKDTree(X).query(X, k=k)
    return dist[:, -1]


def mutual_reachability_mst(X: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Prim's algorithm over the implicit complete mutual-reachability graph.

    Returns an (n-1, 3) array of (u, v, weight) sorted by weight, ties broken
    by (min(u, v), max(u, v)).
    """
    n = X.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    current = 0
    in_tree[0] = True
    for i in range(n - 1):
        d = np.sqrt(np.sum((X - X[current]) ** 2, axis=1))
        mr = np.maximum(np.maximum(d, core), core[current])
        upd = ~in_tree & (mr < best)
        best[upd] = mr[upd]
        parent[upd] = current
        cand = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(cand))
        edges[i] = (parent[nxt], nxt, best[nxt])
        in_tree[nxt] = True
        current = nxt
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    order = np.lexsort((hi, lo, edges[:, 2]))
    return np.column_stack([lo[order], hi[order], edges[order, 2]])


def single_linkage(mst: np.ndarray, n: int) -> np.ndarray:
    """Scipy-style linkage rows (left, right, distance, size); node n+i is row i."""
    parent = np.arange(2 * n - 1)
    size = np.concatenate([np.ones(n, dtype=np.int64), np.zeros(n - 1, dtype=np.int64)])

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    out = np.empty((n - 1, 4))
    for i, (u, v, w) in enumerate(mst):
        a, b = find(int(u)), find(int(v))
        new = n + i
        out[i] = (a, b, w, size[a] + size[b])
        parent[a] = parent[b] = new
        size[new] = size[a] + size[b]
    return out


def _descendant_points(hierarchy: np.ndarray, node: int, n: int) -> list[int]:
    if node < n:
        return [node]
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            left, right = hierarchy[x - n, :2].astype(np.int64)
            stack.extend((right, left))
    return sorted(out)


def condense_tree(hierarchy: np.ndarray, min_cluster_size: int) -> np.ndarray:
    """Rows (parent, child, lambda, child_size); cluster ids start at n."""
    n = hierarchy.shape[0] + 1
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    rows = []

    def size_of(node):
        return 1 if node < n else int(hierarchy[node - n, 3])

    queue = deque([root])
    while queue:
        node = queue.popleft()
        left, right, dist, _ = hierarchy[node - n]
        left, right = int(left), int(right)
        with np.errstate(divide="ignore"):
            lam = 1.0 / dist if dist > 0 else np.inf
        lc, rc = size_of(left), size_of(right)
        parent_label = relabel[node]
        big = [(child, size) for child, size in ((left, lc), (right, rc)) if size >= min_cluster_size]
        if len(big) == 2:
            for child, size in big:
                relabel[child] = next_label
                rows.append((parent_label, next_label, lam, size))
                next_label += 1
                if child >= n:
                    queue.append(child)
            continue
        for child, size in ((left, lc), (right, rc)):
            if size >= min_cluster_size:
                relabel[child] = parent_label
                if child >= n:
                    queue.append(child)
            else:
                for pt in _descendant_points(hierarchy, child, n):
                    rows.append((parent_label, pt, lam, 1))
    return np.array(rows, dtype=np.float64).reshape(-1, 4)


def stabilities(tree: np.ndarray, root: int) -> dict[int, float]:
    parents = tree[:, 0].astype(np.int64)
    children = tree[:, 1].astype(np.int64)
    births = {root: 0.0}
    for c, lam, size in zip(children, tree[:, 2], tree[:, 3]):
        if size > 1:
            births[int(c)] = lam
    stab = {c: 0.0 for c in births}
    with np.errstate(invalid="ignore"):
        for p, lam, size in zip(parents, tree[:, 2], tree[:, 3]):
            stab[int(p)] += (lam - births[int(p)]) * size
    return stab


def select_eom(tree: np.ndarray, root: int, allow_single_cluster: bool = False) -> list[int]:
    stab = stabilities(tree, root)
    cluster_rows = tree[tree[:, 3] > 1]
    kids: dict[int, list[int]] = {}
    for p, c in cluster_rows[:, :2].astype(np.int64):
        kids.setdefault(int(p), []).append(int(c))
    nodes = sorted(stab, reverse=True)
    if not allow_single_cluster:
        nodes = [c for c in nodes if c != root]
    selected = {c: True for c in nodes}
    for node in nodes:
        sub = sum(stab[c] for c in kids.get(node, []))
        if sub > stab[node]:
            selected[node] = False
            stab[node] = sub
        else:
            stack = list(kids.get(node, []))
            while stack:
                c = stack.pop()
                selected[c] = False
                stack.extend(kids.get(c, []))
    return sorted(c for c, keep in selected.items() if keep)


def label_points(tree: np.ndarray, clusters: list[int], n: int, allow_single_cluster: bool = False) -> np.ndarray:
    root = n
    label_of = {c: i for i, c in enumerate(clusters)}
    parent_of = {int(c): int(p) for p, c in tree[:, :2]}
    # clusters are numbered so that parents precede children
    owner = {root: label_of.get(root, NOISE)}
    for c in sorted(int(c) for c, size in zip(tree[:, 1], tree[:, 3]) if size > 1):
        owner[c] = label_of[c] if c in label_of else owner[parent_of[c]]
    labels = np.full(n, NOISE, dtype=np.int64)
    root_selected = root in label_of
    threshold = tree[tree[:, 0] == root, 2].max() if root_selected else np.inf
    point_rows = tree[tree[:, 1] < n]
    point_lambda = np.empty(n)
    point_lambda[point_rows[:, 1].astype(np.int64)] = point_rows[:, 2]
    for pt in range(n):
        own = owner[parent_of[pt]]
        if root_selected:
            # single-cluster mode keeps only points that persist to the root's densest level
            if allow_single_cluster and point_lambda[pt] >= threshold:
                labels[pt] = own
        else:
            labels[pt] = own
    return labels


def hdbscan(E, min_cluster_size: int = 50, min_samples: int | None = None,
            allow_single_cluster: bool = False) -> ClusterAssignment:
    X = _points(E)
    n = X.shape[0]
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if n < min_cluster_size or n < 2:
        return ClusterAssignment.from_labels(np.full(n, NOISE))
    core = core_distances(X, min_samples or min_cluster_size)
    mst = mutual_reachability_mst(X, core)
    hierarchy = single_linkage(mst, n)
    tree = condense_tree(hierarchy, min_cluster_size)
    clusters = select_eom(tree, n, allow_single_cluster)
    return ClusterAssignment.from_labels(label_points(tree, clusters, n, allow_single_cluster))
