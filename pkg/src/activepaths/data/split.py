"""Seeded shuffle-and-partition splits."""
from __future__ import annotations

import math

import numpy as np

from .table import DataError, FlowTable


def split(table: FlowTable, fractions, seed: int = 0, names=None) -> tuple[FlowTable, ...]:
    fractions = [float(f) for f in fractions]
    if not fractions or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    names = list(names) if names is not None else [f"part{i}" for i in range(len(fractions))]
    n = len(table)
    counts = [math.floor(f * n + 1e-9) for f in fractions]
    counts[0] += n - sum(counts)
    order = np.random.default_rng(seed).permutation(n)
    out, start = [], 0
    for count, name in zip(counts, names):
        out.append(table.take(order[start:start + count], split=name))
        start += count
    return tuple(out)


def dev_test_split(table: FlowTable, test_fraction: float = 0.2, val_fraction: float = 0.2,
                   seed: int = 0) -> tuple[FlowTable, FlowTable, FlowTable]:
    """(train, val, test): ``test_fraction`` held out for test, then
    ``val_fraction`` of the remaining development rows for validation."""
    dev = 1.0 - test_fraction
    return split(table, [dev * (1 - val_fraction), dev * val_fraction, test_fraction], seed,
                 names=["train", "val", "test"])
