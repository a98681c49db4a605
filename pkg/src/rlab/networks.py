"""Product-product proximity networks and density-based relatedness.

Two co-occurrence normalizations are provided: the Product Space
(co-occurrences over maximum ubiquity) and the Taxonomy Network (each
co-occurrence additionally divided by the actor's diversification).
Relatedness of an actor to a product is the density: the B-weighted
average of the actor's basket over the target product's neighbors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, TextIO

import numpy as np

from .core_data import BinaryMatrix, ExportPanel, ValueMatrix, aggregate_years, year_slice
from .errors import SchemaError, ValidationError
from .preprocess import binarize, rca


class NetworkKind(Enum):
    PRODUCT_SPACE = "product-space"
    TAXONOMY = "taxonomy"


@dataclass(frozen=True)
class ProximityMatrix:
    """Symmetric product x product similarity matrix."""

    labels: tuple[str, ...]
    values: np.ndarray
    kind: NetworkKind

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.labels), len(self.labels)):
            raise ValidationError("proximity matrix must be square over its labels")
        object.__setattr__(self, "values", v)

    def to_csv(self, dest: str | TextIO) -> None:
        ValueMatrix(self.labels, self.labels, self.values).to_csv(dest)

    def to_edge_list(self, dest: str | TextIO, include_zero: bool = False) -> None:
        """Write the upper triangle as `p,p',weight` rows."""
        from .core_data import _open_text

        close, out = _open_text(dest, "w")
        try:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["product_a", "product_b", "weight"])
            n = len(self.labels)
            for i in range(n):
                for j in range(i + 1, n):
                    x = float(self.values[i, j])
                    if include_zero or x != 0.0:
                        w.writerow([self.labels[i], self.labels[j], repr(x)])
        finally:
            if close:
                out.close()


@dataclass(frozen=True)
class ScoreMatrix:
    """Actor x product relatedness scores."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValidationError("score matrix shape does not match labels")
        if v.size and not np.all(np.isfinite(v)):
            raise ValidationError("scores must be finite")
        object.__setattr__(self, "values", v)

    def to_csv(self, dest) -> None:
        ValueMatrix(self.row_labels, self.col_labels, self.values).to_csv(dest)


def product_space(M: BinaryMatrix) -> ProximityMatrix:
    """Co-occurrences normalized by the larger of the two ubiquities."""
    m = M.values
    u = m.sum(axis=0)
    co = m.T @ m
    denom = np.maximum.outer(u, u)
    B = np.divide(co, denom, out=np.zeros_like(co), where=denom > 0)
    return ProximityMatrix(M.col_labels, B, NetworkKind.PRODUCT_SPACE)


def taxonomy_network(M: BinaryMatrix) -> ProximityMatrix:
    """Co-occurrences weighted by 1/diversification, then by max ubiquity."""
    m = M.values
    u = m.sum(axis=0)
    d = m.sum(axis=1)
    weighted = np.divide(m, d[:, None], out=np.zeros_like(m), where=d[:, None] > 0)
    co = m.T @ weighted
    co = 0.5 * (co + co.T)  # exact symmetry despite float rounding
    denom = np.maximum.outer(u, u)
    B = np.divide(co, denom, out=np.zeros_like(co), where=denom > 0)
    return ProximityMatrix(M.col_labels, B, NetworkKind.TAXONOMY)


def density(M_test: BinaryMatrix, B: ProximityMatrix,
            include_diagonal: bool = False) -> ScoreMatrix:
    """Relatedness of each actor to each product via its basket's density.

    S[c, p] = sum_p' M[c, p'] B[p, p'] / sum_p' B[p, p'], and 0 when the
    denominator vanishes.  The self-proximity B[p, p] is excluded by
    default; it only inflates the denominator for candidate products the
    actor does not yet export.
    """
    if M_test.col_labels != B.labels:
        raise SchemaError("test matrix and proximity matrix have different products")
    Bv = B.values
    if not include_diagonal:
        Bv = Bv.copy()
        np.fill_diagonal(Bv, 0.0)
    denom = Bv.sum(axis=1)
    num = M_test.values @ Bv.T
    S = np.divide(num, denom[None, :], out=np.zeros_like(num), where=denom[None, :] > 0)
    return ScoreMatrix(M_test.row_labels, M_test.col_labels, S)


def network_pipeline(
    panel: ExportPanel,
    kind: NetworkKind,
    train_window: tuple[int, int],
    test_year: int,
    test_actors: Iterable[str],
    binarization_threshold: float = 1.0,
    include_diagonal: bool = False,
) -> ScoreMatrix:
    """End-to-end network relatedness: aggregate, RCA, M, B, density.

    Export volumes are summed over `train_window`, turned into a binary
    specialization matrix, projected into the requested proximity network,
    and scored against the test-year M matrix of `test_actors`.
    """
    total = aggregate_years(panel, *train_window)
    M_train = binarize(rca(total), binarization_threshold)
    build = product_space if kind is NetworkKind.PRODUCT_SPACE else taxonomy_network
    B = build(M_train)
    M_test = binarize(rca(year_slice(panel, test_year)), binarization_threshold)
    M_test = BinaryMatrix(*_restrict(M_test, test_actors))
    return density(M_test, B, include_diagonal=include_diagonal)


def _restrict(M: BinaryMatrix, actors: Iterable[str]):
    sub = M.restrict_rows(tuple(actors))
    return sub.row_labels, sub.col_labels, sub.values
