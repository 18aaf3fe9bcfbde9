"""Schema-driven flow tables and CSV I/O."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

LABEL_COLUMN = "label"
ROW_ID_COLUMN = "row_id"
KINDS = ("numeric", "categorical")


class DataError(ValueError):
    """Input data cannot be used (bad schema, empty file, wrong columns)."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = "numeric"
    range: tuple | None = None
    categories: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"feature {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names in schema")
        if LABEL_COLUMN in names or ROW_ID_COLUMN in names:
            raise DataError(f"{LABEL_COLUMN!r} and {ROW_ID_COLUMN!r} are reserved column names")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __getitem__(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return name in self.names

    def to_dict(self) -> dict:
        out = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind}
            if f.range is not None:
                d["range"] = list(f.range)
            if f.categories is not None:
                d["categories"] = list(f.categories)
            out.append(d)
        return {"features": out}

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        feats = []
        for f in d["features"]:
            feats.append(FeatureSpec(
                name=f["name"],
                kind=f.get("kind", "numeric"),
                range=tuple(f["range"]) if f.get("range") is not None else None,
                categories=tuple(f["categories"]) if f.get("categories") is not None else None,
            ))
        return cls(tuple(feats))

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str


@dataclass(frozen=True, eq=False)
class FlowTable:
    """Rows of raw feature values plus benign(0)/malicious(1) labels.

    ``raw`` maps feature name to a column array (float64 for numeric
    features, object/str for categoricals).
    """

    schema: Schema
    raw: dict
    labels: np.ndarray
    row_ids: np.ndarray
    split: str = "all"
    rejects: tuple[Reject, ...] = field(default=())

    def __post_init__(self):
        n = len(self.labels)
        if set(self.raw) != set(self.schema.names):
            raise DataError("raw columns do not match the schema")
        for name, col in self.raw.items():
            if len(col) != n:
                raise DataError(f"column {name!r} has {len(col)} rows, expected {n}")
        if len(self.row_ids) != n:
            raise DataError("row_ids length mismatch")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 (benign) or 1 (malicious)")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_names(self) -> list[str]:
        return self.schema.names

    def column(self, name: str) -> np.ndarray:
        return self.raw[name]

    def take(self, rows, split: str | None = None) -> "FlowTable":
        rows = np.asarray(rows, dtype=np.int64)
        return FlowTable(
            self.schema,
            {k: v[rows].copy() for k, v in self.raw.items()},
            self.labels[rows].copy(),
            self.row_ids[rows].copy(),
            self.split if split is None else split,
        )

    def with_columns(self, labels=None, split=None, **columns) -> "FlowTable":
        raw = dict(self.raw)
        raw.update(columns)
        return replace(
            self,
            raw=raw,
            labels=self.labels if labels is None else labels,
            split=self.split if split is None else split,
            rejects=(),
        )

    def positions(self, row_ids) -> np.ndarray:
        index = {int(r): i for i, r in enumerate(self.row_ids)}
        return np.array([index[int(r)] for r in row_ids], dtype=np.int64)

    @staticmethod
    def concat(tables, split: str = "all") -> "FlowTable":
        tables = list(tables)
        schema = tables[0].schema
        return FlowTable(
            schema,
            {n: np.concatenate([t.raw[n] for t in tables]) for n in schema.names},
            np.concatenate([t.labels for t in tables]),
            np.concatenate([t.row_ids for t in tables]),
            split,
        )


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)
    return str(value)


def write_csv(table: FlowTable, path=None, delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    names = table.schema.names
    w.writerow([ROW_ID_COLUMN, *names, LABEL_COLUMN])
    cols = [table.raw[n] for n in names]
    for i in range(len(table)):
        w.writerow([int(table.row_ids[i]), *(_format(c[i]) for c in cols), int(table.labels[i])])
    text = buf.getvalue()
    if path is not None:
        from ..io_utils import atomic_write_text

        atomic_write_text(path, text)
    return text


def load_csv(path, schema: Schema, delimiter: str = ",") -> FlowTable:
    """Parse a CSV with a header row. Rows that fail to parse end up in
    ``table.rejects`` with their 1-based line number instead of the table."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_csv(text, schema, delimiter)


def parse_csv(text: str, schema: Schema, delimiter: str = ",") -> FlowTable:
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    if not rows or not any(rows[0]):
        raise DataError("empty file")
    header = [h.strip() for h in rows[0]]
    missing = [n for n in [*schema.names, LABEL_COLUMN] if n not in header]
    if missing:
        raise DataError(f"missing columns: {', '.join(missing)}")
    pos = {h: i for i, h in enumerate(header)}
    has_ids = ROW_ID_COLUMN in pos

    values = {n: [] for n in schema.names}
    labels, ids, rejects = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            rejects.append(Reject(lineno, f"expected {len(header)} fields, got {len(row)}"))
            continue
        try:
            parsed = {}
            for f in schema.features:
                cell = row[pos[f.name]].strip()
                if f.kind == "numeric":
                    try:
                        v = float(cell)
                    except ValueError:
                        raise ValueError(f"{f.name}: not a number: {cell!r}") from None
                    if not np.isfinite(v):
                        raise ValueError(f"{f.name}: non-finite value {cell!r}")
                    parsed[f.name] = v
                else:
                    if cell == "":
                        raise ValueError(f"{f.name}: empty category")
                    parsed[f.name] = cell
            label_cell = row[pos[LABEL_COLUMN]].strip()
            if label_cell not in ("0", "1"):
                raise ValueError(f"label must be 0 or 1, got {label_cell!r}")
            rid = int(row[pos[ROW_ID_COLUMN]]) if has_ids else len(labels)
        except ValueError as exc:
            rejects.append(Reject(lineno, str(exc)))
            continue
        for k, v in parsed.items():
            values[k].append(v)
        labels.append(int(label_cell))
        ids.append(rid)

    raw = {}
    for f in schema.features:
        raw[f.name] = np.array(values[f.name], dtype=np.float64 if f.kind == "numeric" else object)
    return FlowTable(schema, raw, np.array(labels, dtype=np.int64), np.array(ids, dtype=np.int64),
                     rejects=tuple(rejects))
