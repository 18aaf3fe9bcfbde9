"""Accuracy grids for clean and triggered evaluation sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCHEMA_VERSION = 1


def _rate(num: int, den: int):
    return None if den == 0 else num / den


@dataclass(frozen=True)
class SplitMetrics:
    """Accuracies plus a confusion matrix ``[[tn, fp], [fn, tp]]``
    (rows: true class, columns: predicted class; 0 = benign)."""

    n: int
    accuracy: float | None
    benign_accuracy: float | None
    malicious_accuracy: float | None
    confusion: tuple[tuple[int, int], tuple[int, int]]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "benign_accuracy": self.benign_accuracy,
            "malicious_accuracy": self.malicious_accuracy,
            "confusion": [list(r) for r in self.confusion],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitMetrics":
        return cls(d["n"], d["accuracy"], d["benign_accuracy"], d["malicious_accuracy"],
                   tuple(tuple(int(v) for v in r) for r in d["confusion"]))


def split_metrics(y_true, y_pred) -> SplitMetrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"{y_true.shape[0]} labels for {y_pred.shape[0]} predictions")
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    n_ben, n_mal = int(cm[0].sum()), int(cm[1].sum())
    return SplitMetrics(
        n=int(y_true.size),
        accuracy=_rate(int(cm[0, 0] + cm[1, 1]), int(y_true.size)),
        benign_accuracy=_rate(int(cm[0, 0]), n_ben),
        malicious_accuracy=_rate(int(cm[1, 1]), n_mal),
        confusion=((int(cm[0, 0]), int(cm[0, 1])), (int(cm[1, 0]), int(cm[1, 1]))),
    )


def poison_accuracy(original_labels, y_pred, triggered) -> tuple[float | None, int]:
    """Share of triggered, originally-malicious rows predicted benign."""
    original_labels = np.asarray(original_labels)
    sel = np.asarray(triggered, dtype=bool) & (original_labels == 1)
    n = int(sel.sum())
    return _rate(int((np.asarray(y_pred)[sel] == 0).sum()), n), n


@dataclass(frozen=True)
class EvalReport:
    clean: SplitMetrics
    poisoned: SplitMetrics | None = None
    poison_accuracy: float | None = None
    n_poisoned_malicious: int = 0
    model_hash: str = ""
    config_hash: str = ""
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "eval_report",
            "config_hash": self.config_hash,
            "seed": self.seed,
            "model_hash": self.model_hash,
            "clean": self.clean.to_dict(),
            "poisoned": None if self.poisoned is None else self.poisoned.to_dict(),
            "poison_accuracy": self.poison_accuracy,
            "n_poisoned_malicious": self.n_poisoned_malicious,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            SplitMetrics.from_dict(d["clean"]),
            None if d.get("poisoned") is None else SplitMetrics.from_dict(d["poisoned"]),
            d.get("poison_accuracy"),
            d.get("n_poisoned_malicious", 0),
            d.get("model_hash", ""),
            d.get("config_hash", ""),
            d.get("seed"),
        )


def evaluate_predictions(y_clean, pred_clean, y_poisoned=None, pred_poisoned=None, triggered=None,
                         model_hash: str = "", config_hash: str = "", seed=None) -> EvalReport:
    """``y_poisoned`` holds the original (pre-flip) labels of the triggered set;
    ``triggered`` marks which of its rows carry the trigger (all rows when omitted)."""
    clean = split_metrics(y_clean, pred_clean)
    if y_poisoned is None:
        return EvalReport(clean, model_hash=model_hash, config_hash=config_hash, seed=seed)
    if triggered is None:
        triggered = np.ones(len(y_poisoned), dtype=bool)
    pa, n = poison_accuracy(y_poisoned, pred_poisoned, triggered)
    return EvalReport(clean, split_metrics(y_poisoned, pred_poisoned), pa, n,
                      model_hash=model_hash, config_hash=config_hash, seed=seed)
