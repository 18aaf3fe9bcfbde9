"""Exact local-affine attribution for ReLU networks.

For a fixed input the ReLU activation pattern is fixed, so the output
pre-activation is an affine function ``beta @ x + intercept`` of the input.
``beta`` is read off by propagating the output weight column backwards through
the active nodes; contributions are ``beta * x``.
"""
from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .nn import ActivationTrace, BatchTrace, Network, ShapeError, predict_batch


@dataclass(frozen=True, eq=False)
class SlopeCoefficients:
    beta: np.ndarray
    intercept: float
    sample_id: object = None


@dataclass(frozen=True, eq=False)
class ContributionMatrix:
    values: np.ndarray
    sample_ids: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        n, p = self.values.shape
        if len(self.sample_ids) != n or len(self.feature_names) != p:
            raise ShapeError(
                f"contribution matrix {self.values.shape} vs {len(self.sample_ids)} ids, "
                f"{len(self.feature_names)} feature names"
            )

    @property
    def shape(self):
        return self.values.shape

    def subset(self, rows) -> "ContributionMatrix":
        rows = np.asarray(rows)
        return ContributionMatrix(self.values[rows], np.asarray(self.sample_ids)[rows], self.feature_names)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sample_id", *self.feature_names])
        for sid, row in zip(self.sample_ids, self.values):
            writer.writerow([sid, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ContributionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        ids = np.array([int(r[0]) for r in body], dtype=np.int64)
        values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64).reshape(len(body), len(header) - 1)
        return cls(values, ids, tuple(header[1:]))


@dataclass(frozen=True, eq=False)
class PathMask:
    """Per-layer 0/1 matrices shaped like the network weights."""

    layers: tuple[np.ndarray, ...]

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, l):
        return self.layers[l]

    def n_selected(self) -> int:
        return int(sum(int(m.sum()) for m in self.layers))

    @classmethod
    def empty_like(cls, network: Network) -> "PathMask":
        return cls(tuple(np.zeros(w.shape, dtype=np.uint8) for w in network.weights))


def _check_trace(network: Network, trace: ActivationTrace) -> None:
    dims = network.layer_dims
    if np.shape(trace.input) != (dims[0],) or len(trace.pre_activations) != network.n_layers:
        raise ShapeError("trace does not belong to this network")
    for l, h in enumerate(trace.pre_activations):
        if np.shape(h) != (dims[l + 1],):
            raise ShapeError(f"trace layer {l} has shape {np.shape(h)}, expected ({dims[l + 1]},)")
    expected = np.asarray(trace.input) @ network.weights[0] + network.biases[0]
    if not np.allclose(expected, trace.pre_activations[0], rtol=1e-9, atol=1e-12):
        raise ShapeError("trace first-layer pre-activations were not produced by this network")


def _backward_beta(network: Network, pre: Sequence[np.ndarray]) -> np.ndarray:
    """Rows of d h_out / d x for a batch of hidden pre-activation arrays.

    The ReLU subgradient at exactly 0 is taken as 0.
    """
    n = pre[0].shape[0]
    g = np.broadcast_to(network.weights[-1][:, 0], (n, network.weights[-1].shape[0]))
    for l in range(network.n_layers - 1, 0, -1):
        g = (g * (pre[l - 1] > 0)) @ network.weights[l - 1].T
    return np.ascontiguousarray(g)


def slope_coefficients(network: Network, trace: ActivationTrace, sample_id=None) -> SlopeCoefficients:
    _check_trace(network, trace)
    pre = [np.asarray(h)[None, :] for h in trace.pre_activations]
    beta = _backward_beta(network, pre)[0]
    x = np.asarray(trace.input, dtype=np.float64)
    intercept = trace.output_preactivation - float(beta @ x)
    return SlopeCoefficients(beta=beta, intercept=intercept, sample_id=sample_id)


def batch_slopes(network: Network, X) -> tuple[np.ndarray, np.ndarray, BatchTrace]:
    """Slope rows and intercepts for every row of ``X`` in one pass."""
    _, trace = predict_batch(network, X)
    if len(trace) == 0:
        return np.zeros((0, network.layer_dims[0])), np.zeros(0), trace
    beta = _backward_beta(network, trace.pre)
    intercept = trace.logits - np.einsum("ij,ij->i", beta, trace.inputs)
    return beta, intercept, trace


def contributions(beta, x) -> np.ndarray:
    b = beta.beta if isinstance(beta, SlopeCoefficients) else np.asarray(beta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if b.shape != x.shape:
        raise ShapeError(f"beta {b.shape} and x {x.shape} differ in shape")
    return b * x


def contribution_matrix(network: Network, X, sample_ids=None, feature_names=None) -> ContributionMatrix:
    X = np.asarray(X, dtype=np.float64)
    beta, _, trace = batch_slopes(network, X)
    X = trace.inputs
    if sample_ids is None:
        sample_ids = np.arange(X.shape[0])
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(X.shape[1]))
    return ContributionMatrix(beta * X, np.asarray(sample_ids), tuple(feature_names))


def node_activity(network: Network, trace) -> list[np.ndarray]:
    """Boolean activity per layer: inputs (x != 0), hidden nodes (post > 0),
    and the output node (always active). Works on single or batch traces."""
    if isinstance(trace, BatchTrace):
        n = len(trace)
        acts = [trace.inputs != 0]
        acts += [a > 0 for a in trace.post[:-1]]
        acts.append(np.ones((n, 1), dtype=bool))
        return acts
    acts = [np.asarray(trace.input) != 0]
    acts += [np.asarray(a) > 0 for a in trace.post_activations[:-1]]
    acts.append(np.ones(1, dtype=bool))
    return acts


def mask_from_activity(acts: Sequence[np.ndarray]) -> PathMask:
    return PathMask(tuple(np.outer(src, dst).astype(np.uint8) for src, dst in zip(acts[:-1], acts[1:])))


def active_path_mask(network: Network, trace: ActivationTrace) -> PathMask:
    """Weight (k -> p) is on an active path iff both k and p are active.

    Input nodes count as active when their value is nonzero, output nodes
    always count as active. Biases are not part of the mask.
    """
    _check_trace(network, trace)
    return mask_from_activity(node_activity(network, trace))
