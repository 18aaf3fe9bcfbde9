"""In-process pipeline: data preparation, training, evaluation, detection
and elimination. The CLI commands are thin wrappers that add file I/O."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import nn
from ..cluster import ClusterAssignment, ClusterDiffReport, Embedding, cluster_value_census, compare_clusters, hdbscan, kernel_pca
from ..data import Encoder, FlowTable, Schema, apply_trigger, dev_test_split, encode, fit_encoder, inject_trigger, load_csv, synth_generate
from ..data.table import DataError
from ..explain import ContributionMatrix, contribution_matrix
from ..io_utils import sha256_hex
from ..pathtrace import EliminationPlan, UsageDiff, build_elimination_plan, compare_active_paths, eliminate, scaled_threshold
from .config import DetectConfig, EliminateConfig, ExperimentConfig
from .metrics import EvalReport, evaluate_predictions

logger = logging.getLogger(__name__)


class InsufficientDataError(RuntimeError):
    """Too few samples for the requested analysis."""


@dataclass(frozen=True, eq=False)
class DataBundle:
    clean: FlowTable
    poisoned: FlowTable
    poison_ids: np.ndarray
    train: FlowTable
    val: FlowTable
    clean_test: FlowTable
    poisoned_test: FlowTable | None
    encoder: Encoder


def load_source(cfg: ExperimentConfig) -> FlowTable:
    if cfg.data.synth is not None:
        return synth_generate(cfg.data.synth)
    table = load_csv(cfg.data.csv, Schema.load(cfg.data.schema), cfg.data.delimiter)
    if table.rejects:
        logger.warning("%d malformed rows skipped (first at line %d: %s)",
                       len(table.rejects), table.rejects[0].line, table.rejects[0].reason)
    if len(table) == 0:
        raise DataError(f"{cfg.data.csv}: no usable rows")
    return table


def prepare_data(cfg: ExperimentConfig, clean: FlowTable | None = None) -> DataBundle:
    """Poison the whole table, then split it. The clean test set is the same
    row selection taken from the unpoisoned table, and the triggered test set
    is that clean test set with the trigger written into every row."""
    clean = load_source(cfg) if clean is None else clean
    if cfg.trigger is not None:
        poisoned, poison_ids = inject_trigger(clean, cfg.trigger)
    else:
        poisoned, poison_ids = clean, np.zeros(0, dtype=np.int64)
    fr = dict(test_fraction=cfg.data.test_fraction, val_fraction=cfg.data.val_fraction, seed=cfg.seed)
    train, val, _ = dev_test_split(poisoned, **fr)
    _, _, clean_test = dev_test_split(clean, **fr)
    poisoned_test = None
    if cfg.trigger is not None:
        poisoned_test = apply_trigger(clean_test, cfg.trigger.assignments).with_columns(split="test")
    encoder = fit_encoder(train, standardize=cfg.data.standardize)
    assert encoder.fitted_on == "train"
    return DataBundle(clean, poisoned, poison_ids, train, val, clean_test, poisoned_test, encoder)


def model_hash(network: nn.Network) -> str:
    return sha256_hex(nn.serialize(network))[:16]


def build_network(cfg: ExperimentConfig, n_inputs: int) -> nn.Network:
    widths = list(cfg.hidden_widths) if cfg.hidden_widths is not None else nn.default_hidden_widths(n_inputs)
    return nn.init_network([n_inputs, *widths, 1], seed=cfg.seed)


def train_model(cfg: ExperimentConfig, bundle: DataBundle) -> tuple[nn.Network, nn.TrainHistory]:
    X = encode(bundle.encoder, bundle.train)
    Xv = encode(bundle.encoder, bundle.val)
    history = nn.TrainHistory()
    net = nn.train(build_network(cfg, X.shape[1]), (X, bundle.train.labels), (Xv, bundle.val.labels),
                   cfg.train, history=history)
    return net, history


def predict_labels(network: nn.Network, X) -> np.ndarray:
    prob, _ = nn.predict_batch(network, X)
    return (prob > 0.5).astype(np.int64)


def evaluate_model(network: nn.Network, encoder: Encoder, clean_test: FlowTable,
                   poisoned_test: FlowTable | None = None, config_hash: str = "", seed=None) -> EvalReport:
    pred_clean = predict_labels(network, encode(encoder, clean_test))
    if poisoned_test is None:
        return evaluate_predictions(clean_test.labels, pred_clean, model_hash=model_hash(network),
                                    config_hash=config_hash, seed=seed)
    pred_pois = predict_labels(network, encode(encoder, poisoned_test))
    return evaluate_predictions(clean_test.labels, pred_clean, poisoned_test.labels, pred_pois,
                                model_hash=model_hash(network), config_hash=config_hash, seed=seed)


# --------------------------------------------------------------------------
# detection

def raw_feature(encoder: Encoder, encoded_name: str) -> str:
    if encoded_name in encoder.numeric:
        return encoded_name
    head = encoded_name.split("=", 1)[0]
    if head in encoder.categorical:
        return head
    raise KeyError(encoded_name)


def suspicion_score(column: np.ndarray) -> float:
    """Largest per-feature difference over the median difference of the
    same cluster comparison."""
    top = float(column.max()) if column.size else 0.0
    if top <= 0.0:
        return 0.0
    return top / max(float(np.median(column)), 1e-12 * top)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    contributions: ContributionMatrix
    embedding: Embedding
    assignment: ClusterAssignment
    diff: ClusterDiffReport | None
    suspicious_cluster: int | None
    candidate_features: tuple[str, ...]
    scores: dict
    flagged: dict
    census: dict
    params: DetectConfig

    @property
    def sample_ids(self) -> np.ndarray:
        return self.contributions.sample_ids

    def members(self, cluster: int) -> np.ndarray:
        return self.sample_ids[self.assignment.labels == cluster]


def detect(network: nn.Network, encoder: Encoder, table: FlowTable, params: DetectConfig) -> DetectionResult:
    X = encode(encoder, table)
    keep = np.flatnonzero(predict_labels(network, X) == params.predicted_class)
    if keep.size < params.min_cluster_size or keep.size < 2:
        raise InsufficientDataError(
            f"insufficient data: {keep.size} samples predicted as class {params.predicted_class}, "
            f"need at least {max(params.min_cluster_size, 2)}")
    names = tuple(encoder.encoded_names)
    C = contribution_matrix(network, X[keep], table.row_ids[keep], names)
    E = kernel_pca(C, params.d)
    A = hdbscan(E, params.min_cluster_size)
    diff, suspicious, candidates = None, None, ()
    scores, flagged, census = {}, {}, {}
    if A.n_clusters > 0:
        diff = compare_clusters(A, C)
        D = diff.diff_contr_list
        for k, c in enumerate(diff.compared_cluster_ids):
            scores[int(c)] = suspicion_score(D[:, k])
        if diff.n_compared:
            # the comparison with the single largest feature difference
            k = int(np.argmax(D.max(axis=0)))
            suspicious = int(diff.compared_cluster_ids[k])
            order = diff.sorted_contr_inds[:, k]
            top = D[order[0], k]
            candidates = tuple(names[j] for j in order if top > 0 and D[j, k] >= params.candidate_ratio * top)
            raw_cols = {}
            for j in order[:params.census_top_k]:
                f = raw_feature(encoder, names[j])
                raw_cols.setdefault(f, table.raw[f][keep])
            for f, col in raw_cols.items():
                census[f] = cluster_value_census(A.labels, {f: col}, f)
        if params.suspicion_threshold is not None:
            for k, c in enumerate(diff.compared_cluster_ids):
                if scores[int(c)] > params.suspicion_threshold:
                    order = diff.sorted_contr_inds[:, k]
                    top = D[order[0], k]
                    flagged[int(c)] = [names[j] for j in order if D[j, k] >= params.candidate_ratio * top]
    return DetectionResult(C, E, A, diff, suspicious, candidates, scores, flagged, census, params)


# --------------------------------------------------------------------------
# elimination

def expand_features(encoder: Encoder, features) -> tuple[str, ...]:
    """Encoded column names for raw or encoded feature names."""
    names = encoder.encoded_names
    out = []
    for f in features:
        if f in names:
            out.append(f)
        elif f in encoder.categorical:
            out.extend(n for n in names if n.startswith(f + "="))
        else:
            raise KeyError(f"unknown feature {f!r}")
    return tuple(dict.fromkeys(out))


@dataclass(frozen=True, eq=False)
class EliminationResult:
    plan: EliminationPlan
    usage: UsageDiff
    network: nn.Network
    threshold: int
    warning: str | None = None


def rows_for_ids(table: FlowTable, ids) -> np.ndarray:
    return table.positions(np.asarray(ids, dtype=np.int64))


def eliminate_backdoor(network: nn.Network, encoder: Encoder, table: FlowTable, backdoor_ids, reference_ids,
                       features, params: EliminateConfig, provenance=None) -> EliminationResult:
    """Path comparison between the backdoor and reference samples of
    ``table`` (given as row ids), then first-layer surgery."""
    features = expand_features(encoder, features)
    if not features:
        raise ValueError("no backdoor features to eliminate")
    X = encode(encoder, table)
    D1 = X[rows_for_ids(table, backdoor_ids)]
    D2 = X[rows_for_ids(table, reference_ids)]
    if len(D1) == 0 or len(D2) == 0:
        raise InsufficientDataError("insufficient data: backdoor and reference sets must both be non-empty")
    T = params.T if params.T is not None else scaled_threshold(len(D1), params.T_fraction, params.T_floor)
    usage = compare_active_paths(network, D1, D2, T)
    prov = dict(provenance or {})
    prov.update({"n_backdoor": len(D1), "n_reference": len(D2), "threshold": T,
                 "threshold_rule": "explicit" if params.T is not None else
                 f"max({params.T_floor}, ceil({params.T_fraction} * n_backdoor))",
                 "remove_jointly_unused": params.remove_jointly_unused})
    plan = build_elimination_plan(usage, features, encoder.encoded_names, params.remove_jointly_unused, prov)
    idx = [encoder.encoded_names.index(f) for f in features]
    warning = None
    if not plan.mask[0][idx].any():
        warning = (f"backdoor features {', '.join(features)} are not active in any path used more than "
                   f"{T} times by the backdoor samples; nothing removed")
        logger.warning(warning)
        empty = tuple(np.zeros_like(m) for m in plan.mask)
        plan = EliminationPlan(type(plan.mask)(empty), plan.backdoor_features, T, prov, plan.feature_names)
    return EliminationResult(plan, usage, eliminate(network, plan), T, warning)
