"""Train-split-only feature encoding: standardised numerics, one-hot
categoricals."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .table import DataError, FlowTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NumericTransform:
    mean: float
    std: float


@dataclass(frozen=True, eq=False)
class Encoder:
    feature_names: tuple[str, ...]
    numeric: dict
    categorical: dict
    fitted_on: str
    standardize: bool = True

    @property
    def encoded_names(self) -> list[str]:
        out = []
        for name in self.feature_names:
            if name in self.numeric:
                out.append(name)
            else:
                out.extend(f"{name}={c}" for c in self.categorical[name])
        return out

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "numeric": {k: {"mean": v.mean, "std": v.std} for k, v in self.numeric.items()},
            "categorical": {k: list(v) for k, v in self.categorical.items()},
            "fitted_on": self.fitted_on,
            "standardize": self.standardize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Encoder":
        return cls(
            tuple(d["feature_names"]),
            {k: NumericTransform(v["mean"], v["std"]) for k, v in d["numeric"].items()},
            {k: tuple(v) for k, v in d["categorical"].items()},
            d["fitted_on"],
            d.get("standardize", True),
        )


def fit_encoder(train: FlowTable, standardize: bool = True) -> Encoder:
    if len(train) == 0:
        raise DataError("cannot fit an encoder on an empty table")
    if train.split == "test":
        raise DataError("refusing to fit the encoder on the test split")
    numeric, categorical = {}, {}
    for f in train.schema.features:
        col = train.raw[f.name]
        if f.kind == "numeric":
            if standardize:
                mean = float(np.mean(col))
                std = float(np.std(col))
                numeric[f.name] = NumericTransform(mean, std if std > 0 else 1.0)
            else:
                numeric[f.name] = NumericTransform(0.0, 1.0)
        else:
            categorical[f.name] = tuple(sorted({str(v) for v in col}))
    return Encoder(tuple(train.schema.names), numeric, categorical, train.split, standardize)


def encode(enc: Encoder, table: FlowTable, return_report: bool = False):
    """Encoded sample matrix; unseen categories map to an all-zero block."""
    blocks, unseen = [], {}
    for name in enc.feature_names:
        col = table.raw[name]
        if name in enc.numeric:
            t = enc.numeric[name]
            blocks.append(((np.asarray(col, dtype=np.float64) - t.mean) / t.std)[:, None])
        else:
            cats = enc.categorical[name]
            index = {c: i for i, c in enumerate(cats)}
            block = np.zeros((len(table), len(cats)))
            misses = 0
            for i, v in enumerate(col):
                j = index.get(str(v))
                if j is None:
                    misses += 1
                else:
                    block[i, j] = 1.0
            if misses:
                unseen[name] = misses
                logger.warning("%d unseen categories in %r encoded as all zeros", misses, name)
            blocks.append(block)
    X = np.hstack(blocks) if blocks else np.zeros((len(table), 0))
    return (X, unseen) if return_report else X


def decode(enc: Encoder, X) -> dict:
    """Raw columns back from an encoded matrix (None for all-zero one-hots)."""
    X = np.asarray(X, dtype=np.float64)
    out, j = {}, 0
    for name in enc.feature_names:
        if name in enc.numeric:
            t = enc.numeric[name]
            out[name] = X[:, j] * t.std + t.mean
            j += 1
        else:
            cats = enc.categorical[name]
            block = X[:, j:j + len(cats)]
            col = np.empty(X.shape[0], dtype=object)
            for i, row in enumerate(block):
                col[i] = cats[int(np.argmax(row))] if row.any() else None
            out[name] = col
            j += len(cats)
    return out
