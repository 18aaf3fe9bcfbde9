"""Per-feature comparison of cluster contributions against the largest
cluster, plus raw-value censuses per cluster."""
from __future__ import annotations

from collections import Counter
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from .hdbscan import NOISE, ClusterAssignment


class UnknownFeatureError(KeyError):
    pass


def mean_centre(block: np.ndarray) -> np.ndarray:
    return block.mean(axis=0)


def square_diff(d: np.ndarray) -> np.ndarray:
    return d * d


@dataclass(frozen=True, eq=False)
class ClusterDiffReport:
    diff_contr_list: np.ndarray      # p x (K-1)
    sorted_contr_inds: np.ndarray    # p x (K-1)
    largest_cluster_id: int
    compared_cluster_ids: tuple[int, ...]
    feature_names: tuple[str, ...] = ()

    @property
    def n_compared(self) -> int:
        return len(self.compared_cluster_ids)

    def ranked_features(self, column: int) -> list[str]:
        return [self.feature_names[j] for j in self.sorted_contr_inds[:, column]]

    def to_dict(self) -> dict:
        return {
            "largest_cluster_id": self.largest_cluster_id,
            "compared_cluster_ids": list(self.compared_cluster_ids),
            "feature_names": list(self.feature_names),
            "diff_contr_list": self.diff_contr_list.tolist(),
            "sorted_contr_inds": self.sorted_contr_inds.tolist(),
        }


def _labels(labels) -> np.ndarray:
    return np.asarray(labels.labels if isinstance(labels, ClusterAssignment) else labels, dtype=np.int64)


def largest_cluster(labels) -> int:
    labels = _labels(labels)
    ids, counts = np.unique(labels[labels != NOISE], return_counts=True)
    if ids.size == 0:
        raise ValueError("no non-noise clusters to compare")
    # ties go to the smallest id
    return int(ids[np.argmax(counts)])


def compare_clusters(labels, C, centre_fn: Callable = mean_centre,
                     diff_fn: Callable = square_diff) -> ClusterDiffReport:
    """Difference of each cluster's centred contributions from the largest
    cluster's, one column per compared cluster; noise is skipped."""
    lab = _labels(labels)
    values = np.asarray(getattr(C, "values", C), dtype=np.float64)
    names = tuple(getattr(C, "feature_names", ()) or (f"x{j}" for j in range(values.shape[1])))
    if lab.shape[0] != values.shape[0]:
        raise ValueError(f"{lab.shape[0]} labels for {values.shape[0]} contribution rows")
    big = largest_cluster(lab)
    ref = centre_fn(values[lab == big])
    others = [int(c) for c in np.unique(lab) if c != big and c != NOISE]
    p = values.shape[1]
    diffs = np.zeros((p, len(others)))
    inds = np.zeros((p, len(others)), dtype=np.int64)
    for k, c in enumerate(others):
        d = np.asarray(diff_fn(centre_fn(values[lab == c]) - ref), dtype=np.float64)
        diffs[:, k] = d
        inds[:, k] = np.argsort(-d, kind="stable")
    return ClusterDiffReport(diffs, inds, big, tuple(others), names)


def cluster_value_census(labels, raw_columns: Mapping, feature: str) -> dict[int, dict]:
    """Per-cluster value -> count table over raw (unscaled) feature values."""
    lab = _labels(labels)
    if feature not in raw_columns:
        raise UnknownFeatureError(feature)
    col = np.asarray(raw_columns[feature])
    if col.shape[0] != lab.shape[0]:
        raise ValueError(f"{col.shape[0]} raw values for {lab.shape[0]} labels")
    out = {}
    for c in sorted(int(c) for c in np.unique(lab)):
        counts = Counter(_plain(v) for v in col[lab == c])
        out[c] = dict(sorted(counts.items()))
    return out


def _plain(v):
    if isinstance(v, (np.floating, float)) and float(v).is_integer():
        return int(v)
    if isinstance(v, np.generic):
        return v.item()
    return v
