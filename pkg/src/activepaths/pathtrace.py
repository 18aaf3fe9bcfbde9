"""Weight usage over frequent active paths, path comparison between two
datasets, and first-layer elimination plans.

A sample's path is its whole-network active-path mask; samples sharing a mask
share a path. Only paths seen more than ``T`` times are counted.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .explain import PathMask, mask_from_activity, node_activity
from .nn import Network, ShapeError, predict_batch, zero_weights

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 50


class UnknownFeatureError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class WeightCount:
    layers: tuple[np.ndarray, ...]
    n_samples: int = 0
    n_unique_paths: int = 0
    n_frequent_paths: int = 0
    threshold: int = 0

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, l):
        return self.layers[l]

    def __len__(self):
        return len(self.layers)


def scaled_threshold(n: int, fraction: float = 0.0025, floor: int = 5) -> int:
    """Path-frequency threshold proportional to dataset size."""
    return max(floor, math.ceil(fraction * n))


def path_multiplicities(network: Network, D) -> tuple[list[PathMask], list[int]]:
    """Unique active-path masks in ``D`` and how often each occurs,
    ordered by first occurrence."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] == 0:
        raise ValueError("dataset must be a non-empty sample matrix")
    if D.shape[1] != network.layer_dims[0]:
        raise ShapeError(f"dataset has {D.shape[1]} features, network expects {network.layer_dims[0]}")
    _, trace = predict_batch(network, D)
    acts = node_activity(network, trace)
    pattern = np.packbits(np.concatenate(acts, axis=1), axis=1)
    # identical node activity implies identical masks; distinct activity can
    # still give equal masks, so merge again on the mask bytes
    _, first, inverse = np.unique(pattern, axis=0, return_index=True, return_inverse=True)
    counts = Counter()
    masks: dict[bytes, PathMask] = {}
    first_seen: dict[bytes, int] = {}
    group_sizes = np.bincount(inverse.ravel())
    for g, row in enumerate(first):
        mask = mask_from_activity([a[row] for a in acts])
        key = b"".join(np.packbits(m).tobytes() for m in mask)
        counts[key] += int(group_sizes[g])
        masks.setdefault(key, mask)
        first_seen[key] = min(first_seen.get(key, row), row)
    keys = sorted(counts, key=first_seen.__getitem__)
    return [masks[k] for k in keys], [counts[k] for k in keys]


def count_weights_in_active_paths(network: Network, D, T: int = DEFAULT_THRESHOLD) -> WeightCount:
    if T < 0:
        raise ValueError("threshold T must be >= 0")
    masks, counts = path_multiplicities(network, D)
    total = [np.zeros(w.shape, dtype=np.int64) for w in network.weights]
    frequent = 0
    for mask, count in zip(masks, counts):
        if count > T:
            frequent += 1
            for acc, m in zip(total, mask):
                acc += m
    logger.debug("CWAP: %d samples, %d unique paths, %d above T=%d", len(np.asarray(D)), len(masks), frequent, T)
    return WeightCount(tuple(total), int(np.asarray(D).shape[0]), len(masks), frequent, T)


@dataclass(frozen=True, eq=False)
class UsageDiff:
    usage_diff: np.ndarray
    W1: WeightCount
    W2: WeightCount


def compare_active_paths(network: Network, D1, D2, T: int = DEFAULT_THRESHOLD) -> UsageDiff:
    W1 = count_weights_in_active_paths(network, D1, T)
    W2 = count_weights_in_active_paths(network, D2, T)
    ind1 = (W1[0].sum(axis=1) > 0).astype(np.int64)
    ind2 = (W2[0].sum(axis=1) > 0).astype(np.int64)
    return UsageDiff(ind1 - ind2, W1, W2)


@dataclass(frozen=True, eq=False)
class EliminationPlan:
    mask: PathMask
    backdoor_features: tuple[str, ...]
    threshold: int
    provenance: dict = field(default_factory=dict)
    feature_names: tuple[str, ...] = ()

    def first_layer_pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.mask[0])
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    def is_empty(self) -> bool:
        return self.mask.n_selected() == 0

    def to_dict(self) -> dict:
        names = self.feature_names
        return {
            "backdoor_features": list(self.backdoor_features),
            "threshold": self.threshold,
            "provenance": self.provenance,
            "layer_shapes": [list(m.shape) for m in self.mask],
            "first_layer_pairs": [
                {"feature": names[r] if names else r, "input": r, "hidden": c}
                for r, c in self.first_layer_pairs()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, feature_names=()) -> "EliminationPlan":
        layers = [np.zeros(shape, dtype=np.uint8) for shape in d["layer_shapes"]]
        for pair in d["first_layer_pairs"]:
            layers[0][pair["input"], pair["hidden"]] = 1
        return cls(PathMask(tuple(layers)), tuple(d["backdoor_features"]), d["threshold"],
                   d.get("provenance", {}), tuple(feature_names))


def build_elimination_plan(diff: UsageDiff, backdoor_features, feature_names,
                           remove_jointly_unused: bool = True, provenance=None) -> EliminationPlan:
    """First-layer mask: weights leaving a backdoor feature that the backdoor
    dataset's frequent paths use, plus (optionally) weights that neither
    dataset's frequent paths use."""
    backdoor_features = tuple(backdoor_features)
    feature_names = tuple(feature_names)
    if not backdoor_features:
        raise ValueError("at least one backdoor feature is required")
    unknown = [f for f in backdoor_features if f not in feature_names]
    if unknown:
        raise UnknownFeatureError(", ".join(unknown))
    W1, W2 = diff.W1[0], diff.W2[0]
    if W1.shape[0] != len(feature_names):
        raise ShapeError(f"{len(feature_names)} feature names for {W1.shape[0]} first-layer rows")
    first = np.zeros(W1.shape, dtype=np.uint8)
    for f in backdoor_features:
        j = feature_names.index(f)
        first[j] = W1[j] > 0
    if remove_jointly_unused:
        first |= ((W1 == 0) & (W2 == 0)).astype(np.uint8)
    layers = (first,) + tuple(np.zeros(m.shape, dtype=np.uint8) for m in diff.W1.layers[1:])
    return EliminationPlan(PathMask(layers), backdoor_features, diff.W1.threshold,
                           dict(provenance or {}), feature_names)


def eliminate(network: Network, plan: EliminationPlan) -> Network:
    if any(m.any() for m in plan.mask.layers[1:]):
        raise ValueError("elimination plans may only touch the first layer")
    return zero_weights(network, plan.mask)
