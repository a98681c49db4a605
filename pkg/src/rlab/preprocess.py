"""Revealed comparative advantage, binary specialization, and margins.

All functions are pure and operate on labeled matrices from
:mod:`rlab.core_data`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import BinaryMatrix, ValueMatrix
from .errors import DegenerateInputError, ValidationError


@dataclass(frozen=True)
class MarginVector:
    """Labeled vector of row or column margins (ubiquity, diversification)."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.labels) != len(self.values):
            raise ValidationError("margin labels and values differ in length")


def rca(E: ValueMatrix) -> ValueMatrix:
    """Balassa revealed comparative advantage.

    RCA[f, p] = (E[f, p] / sum_p' E[f, p']) * (sum_all E / sum_f' E[f', p]).
    Entries in all-zero rows or columns are defined as 0.
    """
    v = E.values
    if v.size == 0 or not np.any(v > 0):
        raise DegenerateInputError("RCA of an all-zero matrix is undefined")
    if np.any(v < 0):
        raise ValidationError("export volumes must be >= 0")
    row_tot = v.sum(axis=1)
    col_tot = v.sum(axis=0)
    total = v.sum()
    share = np.divide(v, row_tot[:, None], out=np.zeros_like(v),
                      where=row_tot[:, None] > 0)
    weight = np.divide(total, col_tot, out=np.zeros_like(col_tot),
                       where=col_tot > 0)
    return ValueMatrix(E.row_labels, E.col_labels, share * weight[None, :])


def binarize(R: ValueMatrix, threshold: float = 1.0) -> BinaryMatrix:
    """Threshold a matrix into {0,1}; the boundary is inclusive (>=)."""
    if threshold <= 0:
        raise ValidationError("binarization threshold must be > 0")
    return BinaryMatrix(R.row_labels, R.col_labels,
                        (R.values >= threshold).astype(np.float64))


def ubiquity(M: BinaryMatrix) -> MarginVector:
    """Per-product count of actors competitively exporting it (column sums)."""
    return MarginVector(M.col_labels, M.values.sum(axis=0))


def diversification(M: BinaryMatrix) -> MarginVector:
    """Per-actor count of competitively exported products (row sums)."""
    return MarginVector(M.row_labels, M.values.sum(axis=1))
