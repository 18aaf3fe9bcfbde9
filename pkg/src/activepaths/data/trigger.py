"""Replacement-trigger poisoning with label corruption."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .table import DataError, FlowTable


@dataclass(frozen=True)
class TriggerSpec:
    """Set ``assignments`` features to fixed raw values in a ``poisoning_rate``
    fraction of rows, split evenly between the classes, and relabel the
    malicious ones as ``target_label``.

    Only replacement triggers exist; an additive trigger would need a
    ``mode`` field here.
    """

    assignments: dict = field(default_factory=dict)
    target_label: int = 0
    poisoning_rate: float = 0.01
    balance: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.assignments:
            raise ValueError("trigger needs at least one feature assignment")
        if not 0.0 < self.poisoning_rate < 1.0:
            raise ValueError(f"poisoning rate must lie in (0, 1), got {self.poisoning_rate}")
        if self.target_label not in (0, 1):
            raise ValueError("target label must be 0 or 1")

    @property
    def features(self) -> list[str]:
        return list(self.assignments)

    def to_dict(self) -> dict:
        return {
            "assignments": dict(self.assignments),
            "target_label": self.target_label,
            "poisoning_rate": self.poisoning_rate,
            "balance": self.balance,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TriggerSpec":
        return cls(dict(d["assignments"]), d.get("target_label", 0), d.get("poisoning_rate", 0.01),
                   d.get("balance", True), d.get("seed", 0))


def _check_features(table: FlowTable, assignments: dict) -> None:
    for name in assignments:
        if name not in table.schema:
            raise DataError(f"trigger feature {name!r} not in schema")
        if table.schema[name].kind != "numeric":
            raise DataError(f"trigger feature {name!r} must be numeric")


def apply_trigger(table: FlowTable, assignments: dict, rows=None) -> FlowTable:
    """Copy of ``table`` with the trigger values written into ``rows``
    (positions; all rows when None). Labels are left alone."""
    _check_features(table, assignments)
    rows = np.arange(len(table)) if rows is None else np.asarray(rows, dtype=np.int64)
    cols = {}
    for name, value in assignments.items():
        col = table.raw[name].copy()
        col[rows] = float(value)
        cols[name] = col
    return table.with_columns(**cols)


def inject_trigger(table: FlowTable, spec: TriggerSpec) -> tuple[FlowTable, np.ndarray]:
    """Poisoned copy of ``table`` and the sorted row ids that were poisoned."""
    _check_features(table, spec.assignments)
    n = len(table)
    n_poison = math.ceil(spec.poisoning_rate * n)
    if n_poison < 2:
        raise DataError(f"poisoning rate {spec.poisoning_rate} on {n} rows poisons fewer than 2 rows")
    rng = np.random.default_rng(spec.seed)
    benign = np.flatnonzero(table.labels == 0)
    malicious = np.flatnonzero(table.labels == 1)
    if spec.balance:
        n_mal = n_poison // 2
        n_ben = n_poison - n_mal
        deficits = []
        if len(benign) < n_ben:
            deficits.append(f"need {n_ben} benign rows, have {len(benign)}")
        if len(malicious) < n_mal:
            deficits.append(f"need {n_mal} malicious rows, have {len(malicious)}")
        if deficits:
            raise DataError("insufficient rows to poison: " + "; ".join(deficits))
        rows = np.concatenate([
            rng.choice(benign, size=n_ben, replace=False),
            rng.choice(malicious, size=n_mal, replace=False),
        ])
    else:
        rows = rng.choice(n, size=n_poison, replace=False)
    rows = np.sort(rows)
    poisoned = apply_trigger(table, spec.assignments, rows)
    labels = poisoned.labels.copy()
    labels[rows] = spec.target_label
    poisoned = poisoned.with_columns(labels=labels)
    return poisoned, np.sort(table.row_ids[rows])
