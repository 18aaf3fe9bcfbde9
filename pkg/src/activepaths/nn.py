"""Feed-forward ReLU classifiers: forward pass with traces, Adam training,
weight surgery and a versioned binary model format.

Weights are stored fan_in x fan_out, so layer ``l`` computes
``h = a_prev @ W[l] + b[l]``.
"""
from __future__ import annotations

import json
import logging
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

logger = logging.getLogger(__name__)

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("sigmoid", "identity")

MAGIC = b"APNN"
FORMAT_VERSION = 1


class ShapeError(ValueError):
    """Input or mask dimensions do not match the network."""


class CorruptModelError(ValueError):
    """The network holds non-finite parameters."""


class TrainingError(RuntimeError):
    def __init__(self, message: str, last_finite_epoch: int):
        super().__init__(f"{message} (last finite epoch: {last_finite_epoch})")
        self.last_finite_epoch = last_finite_epoch


class ModelFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(
                f"hidden activation must be piecewise linear, one of {HIDDEN_ACTIVATIONS}; "
                f"got {self.hidden_activation!r}"
            )
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        ws = tuple(_readonly(w) for w in self.weights)
        bs = tuple(_readonly(b) for b in self.biases)
        if not ws or len(ws) != len(bs):
            raise ShapeError("need one bias vector per weight matrix")
        for l, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {l}: weights {w.shape} incompatible with biases {b.shape}")
            if l and ws[l - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {l}: fan_in {w.shape[0]} != previous fan_out {ws[l - 1].shape[1]}")
        if ws[-1].shape[1] != 1:
            raise ShapeError("binary classifier needs a single output node")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in zip(self.weights, self.biases))

    def equals(self, other: "Network") -> bool:
        """Bit-exact parameter and activation equality."""
        if self.layer_dims != other.layer_dims:
            return False
        if (self.hidden_activation, self.output_activation) != (other.hidden_activation, other.output_activation):
            return False
        return all(
            w1.tobytes() == w2.tobytes() and b1.tobytes() == b2.tobytes()
            for w1, w2, b1, b2 in zip(self.weights, other.weights, self.biases, other.biases)
        )

    def replace(self, weights=None, biases=None) -> "Network":
        return Network(
            weights=self.weights if weights is None else weights,
            biases=self.biases if biases is None else biases,
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )


def default_hidden_widths(n_inputs: int, budget: int = 10_500) -> list[int]:
    """Three hidden layers shaped (4w, 2w, w), w chosen so the weight count
    (biases included) lands as close as possible to ``budget``."""

    def count(w):
        dims = [n_inputs, 4 * w, 2 * w, w, 1]
        return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))

    best = min(range(1, 256), key=lambda w: abs(count(w) - budget))
    return [4 * best, 2 * best, best]


def init_network(layer_dims: Sequence[int], seed: int = 0, output_activation: str = "sigmoid") -> Network:
    """He-uniform weights scaled by fan-in, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(tuple(weights), tuple(biases), "relu", output_activation)


@dataclass(frozen=True, eq=False)
class ActivationTrace:
    input: np.ndarray
    pre_activations: tuple[np.ndarray, ...]
    post_activations: tuple[np.ndarray, ...]

    @property
    def output_preactivation(self) -> float:
        return float(self.pre_activations[-1][0])


class BatchTrace(Sequence):
    """Layer-wise activations for a batch; indexing yields ActivationTrace."""

    def __init__(self, inputs: np.ndarray, pre: list[np.ndarray], post: list[np.ndarray]):
        self.inputs = inputs
        self.pre = pre
        self.post = post

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return ActivationTrace(
            input=self.inputs[i],
            pre_activations=tuple(h[i] for h in self.pre),
            post_activations=tuple(a[i] for a in self.post),
        )

    def __iter__(self) -> Iterator[ActivationTrace]:
        for i in range(len(self)):
            yield self[i]

    @property
    def logits(self) -> np.ndarray:
        return self.pre[-1][:, 0]


def _output(network: Network, h: np.ndarray) -> np.ndarray:
    if network.output_activation == "sigmoid":
        return sigmoid(h)
    return h.copy()


def _forward_arrays(network: Network, X: np.ndarray) -> BatchTrace:
    if not network.is_finite():
        raise CorruptModelError("network contains non-finite weights or biases")
    pre, post = [], []
    a = X
    last = network.n_layers - 1
    for l, (w, b) in enumerate(zip(network.weights, network.biases)):
        h = a @ w + b
        a = np.maximum(h, 0.0) if l < last else _output(network, h)
        pre.append(h)
        post.append(a)
    return BatchTrace(X, pre, post)


def _as_matrix(network: Network, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return X.reshape(0, network.layer_dims[0])
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D sample matrix, got shape {X.shape}")
    if X.shape[0] and X.shape[1] != network.layer_dims[0]:
        raise ShapeError(f"samples have {X.shape[1]} features, network expects {network.layer_dims[0]}")
    return X


def forward(network: Network, x) -> tuple[float, ActivationTrace]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != network.layer_dims[0]:
        raise ShapeError(f"input of shape {x.shape} does not match input width {network.layer_dims[0]}")
    trace = _forward_arrays(network, x[None, :])[0]
    return float(trace.post_activations[-1][0]), trace


def predict_batch(network: Network, X) -> tuple[np.ndarray, BatchTrace]:
    X = _as_matrix(network, X)
    trace = _forward_arrays(network, X)
    return trace.post[-1][:, 0].copy(), trace


def predict_logits(network: Network, X) -> np.ndarray:
    return predict_batch(network, X)[1].logits.copy()


def zero_weights(network: Network, mask) -> Network:
    """Copy of ``network`` with weights set to exactly 0 where ``mask`` is 1.

    ``mask`` is a PathMask or any per-layer sequence of arrays shaped like the
    weights. Biases are never touched.
    """
    layers = list(mask)
    if len(layers) != network.n_layers:
        raise ShapeError(f"mask has {len(layers)} layers, network has {network.n_layers}")
    new = []
    for l, (w, m) in enumerate(zip(network.weights, layers)):
        m = np.asarray(m)
        if m.shape != w.shape:
            raise ShapeError(f"layer {l}: mask shape {m.shape} != weight shape {w.shape}")
        out = w.copy()
        out[m.astype(bool)] = 0.0
        new.append(out)
    return network.replace(weights=tuple(new))


# --------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    batch_size: int = 64
    seed: int = 0
    loss: str = "bce"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss != "bce":
            raise ValueError("only binary cross-entropy is supported")


def bce_from_logits(z: np.ndarray, y: np.ndarray) -> float:
    # log(1 + exp(-|z|)) form avoids overflow
    return float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def _gradients(network: Network, X: np.ndarray, y: np.ndarray):
    trace = _forward_arrays(network, X)
    n = X.shape[0]
    # d(mean BCE)/d logit
    delta = ((trace.post[-1][:, 0] - y) / n)[:, None]
    gw, gb = [None] * network.n_layers, [None] * network.n_layers
    for l in range(network.n_layers - 1, -1, -1):
        a_prev = X if l == 0 else trace.post[l - 1]
        gw[l] = a_prev.T @ delta
        gb[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ network.weights[l].T) * (trace.pre[l - 1] > 0)
    return gw, gb


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0


def train(network: Network, train_set, val_set, cfg: TrainConfig, history: TrainHistory | None = None) -> Network:
    """Mini-batch Adam on binary cross-entropy with early stopping.

    Returns the parameters from the epoch with the lowest validation loss.
    ``train_set`` and ``val_set`` are ``(X, y)`` pairs.
    """
    X, y = (np.asarray(a, dtype=np.float64) for a in train_set)
    Xv, yv = (np.asarray(a, dtype=np.float64) for a in val_set)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    X, Xv = _as_matrix(network, X), _as_matrix(network, Xv)
    for name, labels in (("train", y), ("val", yv)):
        if not np.isin(labels, (0.0, 1.0)).all():
            raise ValueError(f"{name} labels must be 0 or 1")
    if history is None:
        history = TrainHistory()

    rng = np.random.default_rng(cfg.seed)
    ws = [w.copy() for w in network.weights]
    bs = [b.copy() for b in network.biases]
    params = ws + bs
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0

    def snapshot():
        return network.replace(weights=tuple(ws), biases=tuple(bs))

    best, best_loss, bad_epochs = network, np.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(X.shape[0])
        for start in range(0, X.shape[0], cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            gw, gb = _gradients(snapshot(), X[idx], y[idx])
            step += 1
            c1 = 1.0 - cfg.beta1 ** step
            c2 = 1.0 - cfg.beta2 ** step
            for p, g, mi, vi in zip(params, gw + gb, m, v):
                mi *= cfg.beta1
                mi += (1.0 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1.0 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (mi / c1) / (np.sqrt(vi / c2) + cfg.eps)
        if not all(np.isfinite(p).all() for p in params):
            raise TrainingError("training diverged", last_finite_epoch=epoch - 1)
        current = snapshot()
        train_loss = bce_from_logits(predict_logits(current, X), y)
        val_loss = bce_from_logits(predict_logits(current, Xv), yv) if Xv.shape[0] else train_loss
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingError("training diverged", last_finite_epoch=epoch - 1)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        logger.info("epoch %d train_loss=%.5f val_loss=%.5f", epoch, train_loss, val_loss)
        if val_loss < best_loss:
            best, best_loss, bad_epochs = current, val_loss, 0
            history.best_epoch = epoch
        else:
            bad_epochs += 1
            if bad_epochs > cfg.patience:
                logger.info("early stopping at epoch %d (best %d)", epoch, history.best_epoch)
                break
    return best


# --------------------------------------------------------------------------
# serialization
#
# layout: MAGIC | u16 version | u32 header length | JSON header |
#         per layer: weights (row-major float64 LE) then biases

_PREFIX = struct.Struct("<4sHI")


def serialize(network: Network) -> bytes:
    header = json.dumps(
        {
            "layer_dims": network.layer_dims,
            "hidden_activation": network.hidden_activation,
            "output_activation": network.output_activation,
            "dtype": "<f8",
            "order": "row-major, fan_in x fan_out",
        },
        sort_keys=True,
    ).encode()
    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)), header]
    for w, b in zip(network.weights, network.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def deserialize(data: bytes) -> Network:
    if len(data) < _PREFIX.size:
        raise ModelFormatError("truncated prefix", len(data))
    magic, version, hlen = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version} (expected {FORMAT_VERSION})", 4)
    offset = _PREFIX.size
    if len(data) < offset + hlen:
        raise ModelFormatError("truncated header", len(data))
    try:
        header = json.loads(data[offset:offset + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable header: {exc}", offset) from None
    offset += hlen
    dims = header["layer_dims"]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            nbytes = 8 * int(np.prod(shape))
            if len(data) < offset + nbytes:
                raise ModelFormatError(f"truncated payload: need {nbytes} bytes for array {shape}", len(data))
            arr = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=offset).reshape(shape)
            (weights if len(shape) == 2 else biases).append(arr.astype(np.float64))
            offset += nbytes
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes", offset)
    return Network(tuple(weights), tuple(biases), header["hidden_activation"], header["output_activation"])


def save(network: Network, path) -> None:
    from .io_utils import atomic_write_bytes

    atomic_write_bytes(path, serialize(network))


def load(path) -> Network:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
