"""Partition agreement: MAP labels, contingency tables, adjusted Rand index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulation of two labelings of the same n items."""

    counts: np.ndarray       # (R, C) nonnegative ints
    row_totals: np.ndarray
    col_totals: np.ndarray
    n: int


def map_labels(resp: np.ndarray) -> np.ndarray:
    """Hard assignment argmax_g z_ig; ties go to the smallest index."""
    return np.argmax(np.asarray(resp), axis=1)


def contingency_table(a: np.ndarray, b: np.ndarray) -> ContingencyTable:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors must share one length, got {a.shape} and {b.shape}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    r, c = ai.max() + 1, bi.max() + 1
    counts = np.zeros((r, c), dtype=np.int64)
    np.add.at(counts, (ai, bi), 1)
    return ContingencyTable(
        counts=counts,
        row_totals=counts.sum(axis=1),
        col_totals=counts.sum(axis=0),
        n=int(a.shape[0]),
    )


def _comb2(x) -> int:
    x = int(x)
    return x * (x - 1) // 2


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Chance-corrected pair-counting agreement between two partitions.

    Pair counts are accumulated in exact integer arithmetic and only the final
    ratio is floated.  When both partitions are trivial the adjustment
    denominator vanishes; the function then returns 1.0 if the partitions
    coincide up to relabeling and 0.0 otherwise.
    """
    table = contingency_table(a, b)
    if table.n < 2:
        raise ValueError("need at least 2 items to compare partitions")
    sum_cells = sum(_comb2(v) for v in table.counts.ravel())
    sum_rows = sum(_comb2(v) for v in table.row_totals)
    sum_cols = sum(_comb2(v) for v in table.col_totals)
    total = _comb2(table.n)

    # ARI = (total*sum_cells - sum_rows*sum_cols) /
    #       (total*(sum_rows+sum_cols)/2 - sum_rows*sum_cols), scaled by 2
    # to keep the half exact in integers.
    numer = 2 * (total * sum_cells - sum_rows * sum_cols)
    denom = total * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols
    if denom == 0:
        matches = (
            np.count_nonzero(table.counts, axis=0).max() <= 1
            and np.count_nonzero(table.counts, axis=1).max() <= 1
        )
        return 1.0 if matches else 0.0
    return numer / denom
