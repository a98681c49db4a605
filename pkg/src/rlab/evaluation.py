"""Activation test sets and the imbalanced-classification metric suite.

The forecast exercise scores candidate (actor, product) pairs that were
inactive at the base year and checks them against the test-year binary
matrix.  Every threshold metric treats a score equal to the threshold as
a positive prediction, matching the inclusive binarization convention.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .core_data import ActorLevel, ExportPanel, year_slice
from .errors import DegenerateInputError, SchemaError, ValidationError
from .networks import ScoreMatrix
from .preprocess import binarize, rca


@dataclass(frozen=True)
class EvalContext:
    """How to build and score an activation test set."""

    level: ActorLevel
    base_year: int
    test_year: int
    activation_threshold: float = 0.25
    binarization_threshold: float = 1.0
    ks: tuple[int, int] = (1000, 5)


@dataclass(frozen=True)
class TestSet:
    """Activation candidates with ground-truth labels.

    Pairs are stored as parallel index arrays into `actors` / `products`,
    ordered by (actor index, product index); that ordering is the
    deterministic tie-break used by the ranking metrics.
    """

    actors: tuple[str, ...]
    products: tuple[str, ...]
    actor_idx: np.ndarray
    product_idx: np.ndarray
    labels: np.ndarray
    filter_spec: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.labels)
        if len(self.actor_idx) != n or len(self.product_idx) != n:
            raise ValidationError("test-set arrays must have equal length")
        if n and not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValidationError("labels must be binary")

    @property
    def n_pairs(self) -> int:
        return len(self.labels)

    def pairs(self) -> list[tuple[str, str, int]]:
        return [(self.actors[a], self.products[p], int(y))
                for a, p, y in zip(self.actor_idx, self.product_idx, self.labels)]


@dataclass
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    """Full metric bundle for one scored test set."""

    best_f1: float
    f1_threshold: float
    auc_pr: float
    roc_auc: float
    precision_at_k: float
    k: int
    mean_precision_at_k: float
    k_per_actor: int
    mcc: float
    confusion: Confusion
    n_pairs: int
    n_positive: int
    metadata: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "best_f1": self.best_f1,
            "f1_threshold": self.f1_threshold,
            "auc_pr": self.auc_pr,
            "roc_auc": self.roc_auc,
            f"precision_at_{self.k}": self.precision_at_k,
            "k": self.k,
            f"mean_precision_at_{self.k_per_actor}": self.mean_precision_at_k,
            "k_per_actor": self.k_per_actor,
            "mcc": self.mcc,
            "confusion": {"tp": self.confusion.tp, "fp": self.confusion.fp,
                          "fn": self.confusion.fn, "tn": self.confusion.tn},
            "n_pairs": self.n_pairs,
            "n_positive": self.n_positive,
            "metadata": self.metadata,
        }
        if include_timings and self.timings:
            d["timings"] = self.timings
        return d

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings=include_timings),
                          sort_keys=True, indent=2) + "\n"

    METRIC_COLUMNS = ("best_f1", "auc_pr", "roc_auc", "precision_at_k",
                      "mean_precision_at_k", "mcc")

    def metric_values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.METRIC_COLUMNS}


# ---------------------------------------------------------------------------
# Test-set construction

def build_activation_testset(
    panel: ExportPanel,
    level: ActorLevel,
    base_year: int,
    test_year: int,
    threshold: float = 0.25,
    test_actors: Iterable[str] | None = None,
    binarization_threshold: float = 1.0,
) -> TestSet:
    """Candidate activations: pairs inactive at the base year.

    Firm level keeps pairs with RCA(base_year) < threshold; country level
    applies the stronger rule RCA(y) < threshold for every year from the
    panel start through the base year.  Labels come from the test-year
    binary matrix.
    """
    if base_year >= test_year:
        raise ValidationError("base year must precede test year")
    actors = tuple(sorted(test_actors)) if test_actors is not None else panel.actors
    a_ix = panel.actor_index()
    missing = [a for a in actors if a not in a_ix]
    if missing:
        raise SchemaError(f"unknown test actors: {missing[:5]}")
    rows = np.array([a_ix[a] for a in actors], dtype=np.intp)

    if level is ActorLevel.FIRM:
        R = rca(year_slice(panel, base_year)).values[rows]
        candidate = R < threshold
        rule = "rca(base) < threshold"
    else:
        candidate = np.ones((len(actors), len(panel.products)), dtype=bool)
        for y in range(panel.years[0], base_year + 1):
            Ry = rca(year_slice(panel, y)).values[rows]
            candidate &= Ry < threshold
        rule = "rca(y) < threshold for all y <= base"

    M_test = binarize(rca(year_slice(panel, test_year)), binarization_threshold)
    labels_full = M_test.values[rows]

    ai, pi = np.nonzero(candidate)  # row-major: ordered by (actor, product)
    return TestSet(
        actors=actors,
        products=panel.products,
        actor_idx=ai.astype(np.int32),
        product_idx=pi.astype(np.int32),
        labels=labels_full[ai, pi].astype(np.int8),
        filter_spec={"level": level.value, "rule": rule, "threshold": threshold,
                     "base_year": base_year, "test_year": test_year},
    )


def scores_for(scores: ScoreMatrix, testset: TestSet) -> np.ndarray:
    """Align a score matrix to the test set's pair order."""
    row_ix = {a: i for i, a in enumerate(scores.row_labels)}
    col_ix = {p: j for j, p in enumerate(scores.col_labels)}
    try:
        rows = np.array([row_ix[a] for a in testset.actors], dtype=np.intp)
        cols = np.array([col_ix[p] for p in testset.products], dtype=np.intp)
    except KeyError as e:
        raise SchemaError(f"scores are missing label {e.args[0]!r}") from e
    return scores.values[rows[testset.actor_idx], cols[testset.product_idx]]


# ---------------------------------------------------------------------------
# Count-level metrics (exact consistency oracles for published tables)

def f1_score(tp: int, fp: int, fn: int) -> float:
    """F1 from confusion counts; 0 when precision + recall is 0."""
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def mcc(tp: int, fp: int, fn: int, tn: int) -> float:
    """Matthews correlation; 0 by convention when a margin is empty.

    The denominator is computed as a product of square roots of pairwise
    margin products, so counts in the 1e8 range stay exact and cannot
    overflow.
    """
    margins = [(tp + fp), (tp + fn), (tn + fp), (tn + fn)]
    if any(m == 0 for m in margins):
        return 0.0
    num = float(tp) * float(tn) - float(fp) * float(fn)
    den = math.sqrt(float(margins[0]) * float(margins[1])) \
        * math.sqrt(float(margins[2]) * float(margins[3]))
    return num / den


# ---------------------------------------------------------------------------
# Score-level metrics

def _check_scores(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be 1-D and equally long")
    if scores.size == 0:
        raise DegenerateInputError("no pairs to evaluate")
    return scores, labels.astype(np.int64)


def _threshold_scan(scores: np.ndarray, labels: np.ndarray):
    """Cumulative TP/(TP+FP) at every distinct score, scanned descending."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    cum_tp = np.cumsum(y)
    cum_n = np.arange(1, len(y) + 1)
    # last position of each tied group = counts at threshold s[i]
    boundary = np.nonzero(np.diff(s))[0]
    last = np.concatenate([boundary, [len(s) - 1]])
    return s[last], cum_tp[last], cum_n[last]


def best_f1(scores: Sequence[float], labels: Sequence[int]) -> tuple[float, float]:
    """Scan all distinct scores as thresholds; return (threshold, max F1).

    Prediction is positive when score >= threshold.  Ties in F1 resolve to
    the highest threshold.
    """
    scores, labels = _check_scores(np.asarray(scores, dtype=np.float64),
                                   np.asarray(labels))
    n_pos = int(labels.sum())
    thr, tp_at, n_at = _threshold_scan(scores, labels)
    f1 = np.zeros(len(thr))
    denom = n_at + n_pos  # == 2*TP + FP + FN
    np.divide(2.0 * tp_at, denom, out=f1, where=denom > 0)
    best = int(np.argmax(f1))  # first (= highest threshold) wins ties
    return float(thr[best]), float(f1[best])


def precision_recall_at(
    scores: Sequence[float], labels: Sequence[int], threshold: float
) -> tuple[float, float, Confusion]:
    """Precision, recall, and confusion counts at a fixed score threshold."""
    scores, labels = _check_scores(np.asarray(scores, dtype=np.float64),
                                   np.asarray(labels))
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    tn = int(np.sum(~pred & (labels == 0)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return precision, recall, Confusion(tp, fp, fn, tn)


def _ranking(scores: np.ndarray, tie_key: tuple[np.ndarray, np.ndarray] | None):
    """Indices sorted by descending score, tied groups by (actor, product)."""
    if tie_key is None:
        return np.argsort(-scores, kind="stable")
    a, p = tie_key
    return np.lexsort((p, a, -scores))


def precision_at_k(
    scores: Sequence[float],
    labels: Sequence[int],
    k: int,
    tie_key: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Fraction of the k highest-scored pairs whose label is 1.

    Uses all pairs when fewer than k exist.  Ties resolve by (actor,
    product) index when `tie_key` is given, else by input position.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    scores, labels = _check_scores(np.asarray(scores, dtype=np.float64),
                                   np.asarray(labels))
    order = _ranking(scores, tie_key)
    top = order[:min(k, len(order))]
    return float(labels[top].mean())


def mean_precision_at_k(
    scores: Sequence[float],
    labels: Sequence[int],
    k: int,
    groups: Sequence[int],
    tie_key: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Per-actor precision over the actor's top-k pairs, averaged over actors.

    Actors with fewer than k candidates use all of them; actors with no
    candidates are excluded from the average.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    scores, labels = _check_scores(np.asarray(scores, dtype=np.float64),
                                   np.asarray(labels))
    groups = np.asarray(groups)
    order = _ranking(scores, tie_key)
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order))
    by_group = np.lexsort((pos, groups))  # group-major, best score first
    seg_starts = np.concatenate([[0], np.nonzero(np.diff(groups[by_group]))[0] + 1,
                                 [len(by_group)]])
    precisions = []
    for s0, s1 in zip(seg_starts[:-1], seg_starts[1:]):
        top = by_group[s0:min(s0 + k, s1)]
        precisions.append(labels[top].mean())
    if not precisions:
        raise DegenerateInputError("no actor has candidate pairs")
    return float(np.mean(precisions))


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Rank-based ROC-AUC (Mann-Whitney, average ranks for ties)."""
    scores, labels = _check_scores(np.asarray(scores, dtype=np.float64),
                                   np.asarray(labels))
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("ROC-AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def pr_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision by step integration over distinct score thresholds.

    Tied scores form one threshold group, so constant scores give exactly
    the positive prevalence.
    """
    scores, labels = _check_scores(np.asarray(scores, dtype=np.float64),
                                   np.asarray(labels))
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DegenerateInputError("PR-AUC needs at least one positive label")
    _, tp_at, n_at = _threshold_scan(scores, labels)
    precision = tp_at / n_at
    delta_tp = np.diff(np.concatenate([[0], tp_at]))
    return float((precision * delta_tp).sum() / n_pos)


def report(
    scores: ScoreMatrix | np.ndarray,
    testset: TestSet,
    ks: tuple[int, int] = (1000, 5),
    metadata: dict | None = None,
    timings: dict | None = None,
) -> MetricsReport:
    """Compute the full metric bundle over a scored test set.

    MCC and the confusion counts are evaluated at the best-F1 threshold.
    """
    if isinstance(scores, ScoreMatrix):
        s = scores_for(scores, testset)
    else:
        s = np.asarray(scores, dtype=np.float64)
        if s.shape != testset.labels.shape:
            raise SchemaError("score vector does not cover the test pairs")
    y = testset.labels.astype(np.int64)
    k, k_actor = ks
    tie_key = (testset.actor_idx, testset.product_idx)

    thr, f1 = best_f1(s, y)
    _, _, conf = precision_recall_at(s, y, thr)
    rep = MetricsReport(
        best_f1=f1,
        f1_threshold=thr,
        auc_pr=pr_auc(s, y),
        roc_auc=roc_auc(s, y),
        precision_at_k=precision_at_k(s, y, k, tie_key=tie_key),
        k=k,
        mean_precision_at_k=mean_precision_at_k(s, y, k_actor, testset.actor_idx,
                                                tie_key=tie_key),
        k_per_actor=k_actor,
        mcc=mcc(conf.tp, conf.fp, conf.fn, conf.tn),
        confusion=conf,
        n_pairs=testset.n_pairs,
        n_positive=int(y.sum()),
        metadata={**testset.filter_spec, **(metadata or {})},
        timings=timings or {},
    )
    return rep


# ---------------------------------------------------------------------------
# Cross-model tables

def write_reports_csv(reports: dict[str, MetricsReport], dest) -> None:
    """One CSV row per model with the headline metrics and counts."""
    from .core_data import _open_text

    close, out = _open_text(dest, "w")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["model"] + list(MetricsReport.METRIC_COLUMNS)
                   + ["tp", "fp", "fn", "tn"])
        for name, r in reports.items():
            w.writerow([name] + [repr(v) for v in r.metric_values().values()]
                       + [r.confusion.tp, r.confusion.fp, r.confusion.fn, r.confusion.tn])
    finally:
        if close:
            out.close()


def write_radar_csv(reports: dict[str, MetricsReport], baseline: str, dest) -> None:
    """Each metric divided by the baseline model's value (radar-plot input)."""
    from .core_data import _open_text

    if baseline not in reports:
        raise SchemaError(f"baseline model {baseline!r} not among reports")
    base = reports[baseline].metric_values()
    close, out = _open_text(dest, "w")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["model"] + list(MetricsReport.METRIC_COLUMNS))
        for name, r in reports.items():
            row = [name]
            for metric, value in r.metric_values().items():
                b = base[metric]
                row.append(repr(value / b if b else 0.0))
            w.writerow(row)
    finally:
        if close:
            out.close()
