"""Per-product random forests over lagged export baskets.

For each target product a forest is trained on rows of actor
representation values (RCA or binary M) at a feature year, labeled by the
actor's specialization in the target product `lag` years later.  Trees
are grown from scratch (greedy CART, Gini impurity, midpoint thresholds)
by the compiled kernels in :mod:`rlab.tree_kernels`; every (product,
tree) pair draws from an independent counter-based random stream, so a
training run is bit-reproducible regardless of worker count.
"""

from __future__ import annotations

import io
import json
import struct
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .core_data import ActorLevel, ExportPanel, ValueMatrix, year_slice
from .errors import (
    DegenerateInputError,
    RangeError,
    SchemaError,
    ValidationError,
)
from .preprocess import binarize, rca
from .tree_kernels import grow_tree, predict_forest

FOREST_MAGIC = b"RLABF1\n"


class Representation(Enum):
    RCA = "rca"
    BINARY = "binary"


def representation_rule(train_level: ActorLevel, test_level: ActorLevel) -> Representation:
    """RCA within one data level; binary M across levels.

    RCA scales differ wildly between firms and countries, so cross-level
    runs fall back to the binary specialization matrix for both the
    training features and the prediction inputs.
    """
    return Representation.RCA if train_level is test_level else Representation.BINARY


@dataclass(frozen=True)
class TrainingDesign:
    """What a forest trains on: years, lag, representation, actors, features."""

    feature_years: tuple[int, ...]
    lag: int
    representation: Representation
    train_actors: tuple[str, ...]
    feature_products: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.feature_years:
            raise ValidationError("at least one feature year required")
        if self.lag < 1:
            raise ValidationError("lag must be >= 1")


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None -> sqrt of feature count
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be None or >= 0")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


@dataclass
class DecisionTree:
    """Flat preorder node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def leaves(self) -> np.ndarray:
        return np.nonzero(self.feature < 0)[0]

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("feature", "threshold", "left", "right",
                             "value", "n_node_samples"))


@dataclass
class ForestModel:
    product: str
    product_index: int
    trees: tuple[DecisionTree, ...]
    design: TrainingDesign
    hyperparams: Hyperparams

    def __eq__(self, other):
        if not isinstance(other, ForestModel):
            return NotImplemented
        return (self.product == other.product
                and self.product_index == other.product_index
                and self.design == other.design
                and self.hyperparams == other.hyperparams
                and len(self.trees) == len(other.trees)
                and all(a == b for a, b in zip(self.trees, other.trees)))


# ---------------------------------------------------------------------------
# Training-set construction

def representation_matrix(
    panel: ExportPanel,
    year: int,
    representation: Representation,
    binarization_threshold: float = 1.0,
) -> ValueMatrix:
    """Per-year actor x product input values in the requested representation."""
    R = rca(year_slice(panel, year))
    if representation is Representation.RCA:
        return R
    return binarize(R, binarization_threshold)


@dataclass
class DesignMatrix:
    """Stacked per-year feature rows plus the full label matrix."""

    X: np.ndarray              # (rows, n_feature_products)
    labels: np.ndarray         # (rows, n_products) int8, M at year+lag
    feature_products: tuple[str, ...]
    label_products: tuple[str, ...]
    row_actors: tuple[str, ...]
    row_years: np.ndarray


def _validate_design(panel: ExportPanel, design: TrainingDesign) -> None:
    if not panel.years:
        raise RangeError("panel has no years")
    lo, hi = panel.years[0], panel.years[-1]
    for y in design.feature_years:
        if y < lo or y + design.lag > hi:
            raise RangeError(f"feature year {y} (+lag {design.lag}) outside panel range")
    a_ix = panel.actor_index()
    missing = [a for a in design.train_actors if a not in a_ix]
    if missing:
        raise SchemaError(f"unknown training actors: {missing[:5]}")
    if design.feature_products is not None:
        p_ix = panel.product_index()
        missing = [p for p in design.feature_products if p not in p_ix]
        if missing:
            raise SchemaError(f"unknown feature products: {missing[:5]}")


def build_design_matrix(
    panel: ExportPanel,
    design: TrainingDesign,
    binarization_threshold: float = 1.0,
) -> DesignMatrix:
    """One row per (feature year, training actor), year-major."""
    _validate_design(panel, design)
    feature_products = (design.feature_products
                        if design.feature_products is not None else panel.products)
    a_ix = panel.actor_index()
    rows = np.array([a_ix[a] for a in design.train_actors], dtype=np.intp)
    p_ix = panel.product_index()
    fcols = np.array([p_ix[p] for p in feature_products], dtype=np.intp)

    X_parts, L_parts, year_parts = [], [], []
    for y in design.feature_years:
        R = representation_matrix(panel, y, design.representation,
                                  binarization_threshold)
        M_lag = binarize(rca(year_slice(panel, y + design.lag)),
                         binarization_threshold)
        X_parts.append(R.values[np.ix_(rows, fcols)])
        L_parts.append(M_lag.values[rows].astype(np.int8))
        year_parts.append(np.full(len(rows), y, dtype=np.int32))
    return DesignMatrix(
        X=np.vstack(X_parts),
        labels=np.vstack(L_parts),
        feature_products=tuple(feature_products),
        label_products=panel.products,
        row_actors=design.train_actors * len(design.feature_years),
        row_years=np.concatenate(year_parts),
    )


def build_training_set(
    panel: ExportPanel,
    p: str,
    design: TrainingDesign,
    binarization_threshold: float = 1.0,
) -> tuple[ValueMatrix, np.ndarray]:
    """Feature matrix and label vector for one target product."""
    dm = build_design_matrix(panel, design, binarization_threshold)
    if p not in dm.label_products:
        raise SchemaError(f"unknown target product {p!r}")
    col = dm.label_products.index(p)
    row_labels = tuple(f"{a}:{y}" for a, y in zip(dm.row_actors, dm.row_years))
    features = ValueMatrix(row_labels, dm.feature_products, dm.X)
    return features, dm.labels[:, col].copy()


# ---------------------------------------------------------------------------
# Tree and forest training

def _tree_seed(seed: int, product_index: int, tree_index: int) -> np.uint64:
    ss = np.random.SeedSequence(entropy=seed,
                                spawn_key=(product_index, tree_index))
    return np.uint64(ss.generate_state(1, np.uint64)[0])


def _mtry(hp: Hyperparams, n_features: int) -> int:
    if hp.features_per_split is None:
        return max(1, int(np.sqrt(n_features)))
    if hp.features_per_split > n_features:
        raise ValidationError(
            f"features_per_split {hp.features_per_split} exceeds {n_features} features")
    return max(1, hp.features_per_split)


def _grow(csr: sp.csr_matrix, y: np.ndarray, hp: Hyperparams,
          seed: np.uint64) -> DecisionTree:
    max_depth = -1 if hp.max_depth is None else hp.max_depth
    arrays = grow_tree(
        csr.indptr.astype(np.int64), csr.indices.astype(np.int32),
        csr.data.astype(np.float64), y.astype(np.float64),
        csr.shape[1], max_depth, hp.min_samples_leaf,
        _mtry(hp, csr.shape[1]), hp.bootstrap, seed)
    return DecisionTree(*arrays)


def train_tree(
    features: ValueMatrix | np.ndarray,
    labels: Sequence[int],
    hp: Hyperparams,
    seed: np.uint64 | int = 0,
) -> DecisionTree:
    """Grow a single CART tree (no bootstrap resampling at this entry point)."""
    X = features.values if isinstance(features, ValueMatrix) else np.asarray(features, float)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateInputError("training data must contain at least one sample")
    if X.shape[0] != len(y):
        raise ValidationError("features and labels disagree on sample count")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be binary")
    csr = sp.csr_matrix(X)
    csr.eliminate_zeros()
    return _grow(csr, y, replace(hp, bootstrap=False), np.uint64(seed))


def train_forest(
    panel: ExportPanel,
    p: str,
    design: TrainingDesign,
    hp: Hyperparams,
    binarization_threshold: float = 1.0,
) -> ForestModel:
    """Train the forest for one target product."""
    models = train_forests(panel, [p], design, hp,
                           binarization_threshold=binarization_threshold)
    return models[p]


def train_forests(
    panel: ExportPanel,
    products: Sequence[str],
    design: TrainingDesign | Mapping[str, TrainingDesign],
    hp: Hyperparams,
    workers: int | None = None,
    binarization_threshold: float = 1.0,
) -> dict[str, ForestModel]:
    """Train one forest per product, sharing the stacked design matrix.

    `design` may be a single design or a per-product map (partition
    restriction); all designs must agree on everything except the feature
    products.
    """
    if isinstance(design, Mapping):
        design_of = dict(design)
        missing = [p for p in products if p not in design_of]
        if missing:
            raise SchemaError(f"no design for products: {missing[:5]}")
        base = next(iter(design_of.values()))
        for d in design_of.values():
            if (d.feature_years, d.lag, d.representation, d.train_actors) != (
                    base.feature_years, base.lag, base.representation, base.train_actors):
                raise ValidationError("per-product designs must differ only in feature products")
        full = replace(base, feature_products=None)
    else:
        design_of = {p: design for p in products}
        full = replace(design, feature_products=None)

    dm = build_design_matrix(panel, full, binarization_threshold)
    if dm.X.shape[0] == 0:
        raise DegenerateInputError("empty training set")
    p_ix = panel.product_index()
    fp_ix = {p: j for j, p in enumerate(dm.feature_products)}

    # one CSR per distinct feature set, shared by the products that use it
    csr_cache: dict[tuple[str, ...] | None, sp.csr_matrix] = {}

    def csr_for(feature_products):
        key = feature_products
        if key not in csr_cache:
            if key is None:
                sub = dm.X
            else:
                cols = np.array([fp_ix[p] for p in key], dtype=np.intp)
                sub = dm.X[:, cols]
            m = sp.csr_matrix(sub)
            m.eliminate_zeros()
            csr_cache[key] = m
        return csr_cache[key]

    def build_one(p: str) -> ForestModel:
        d = design_of[p]
        if p not in p_ix:
            raise SchemaError(f"unknown target product {p!r}")
        if d.feature_products is not None:
            bad = [q for q in d.feature_products if q not in fp_ix]
            if bad:
                raise SchemaError(f"feature products outside panel: {bad[:5]}")
        csr = csr_for(d.feature_products)
        y = dm.labels[:, p_ix[p]]
        pi = p_ix[p]
        trees = tuple(_grow(csr, y, hp, _tree_seed(hp.seed, pi, t))
                      for t in range(hp.n_trees))
        return ForestModel(p, pi, trees, d, hp)

    products = list(products)
    for p in products:  # materialize shared CSRs before threading
        csr_for(design_of[p].feature_products)

    if workers is not None and workers > 1 and len(products) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(build_one, products))
    else:
        built = [build_one(p) for p in products]
    return {m.product: m for m in built}


def predict(model: ForestModel, inputs: ValueMatrix) -> np.ndarray:
    """Forest score per input row: mean leaf positive fraction, in [0, 1]."""
    feature_products = model.design.feature_products
    col_ix = inputs.col_index()
    if feature_products is None:
        cols = np.arange(len(inputs.col_labels), dtype=np.intp)
    else:
        missing = [p for p in feature_products if p not in col_ix]
        if missing:
            raise SchemaError(f"inputs missing feature products: {missing[:5]}")
        cols = np.array([col_ix[p] for p in feature_products], dtype=np.intp)
    X = np.ascontiguousarray(inputs.values[:, cols], dtype=np.float64)

    offsets = np.zeros(len(model.trees) + 1, dtype=np.int64)
    for t, tree in enumerate(model.trees):
        offsets[t + 1] = offsets[t] + tree.n_nodes
    feat = np.concatenate([t.feature for t in model.trees])
    thr = np.concatenate([t.threshold for t in model.trees])
    left = np.concatenate([t.left for t in model.trees])
    right = np.concatenate([t.right for t in model.trees])
    value = np.concatenate([t.value for t in model.trees])
    out = np.empty(X.shape[0], dtype=np.float64)
    predict_forest(X, feat, thr, left, right, value, offsets, out)
    return out


# ---------------------------------------------------------------------------
# Hyperparameter tuning

@dataclass
class TuneRow:
    value: object
    best_f1: float
    train_seconds: float


@dataclass
class TuneResult:
    param: str
    best_value: object
    rows: list[TuneRow] = field(default_factory=list)


_REGULARIZED_ORDER = {
    # key(v) sorts from most to least regularized
    "max_depth": lambda v: float("inf") if v is None else v,
    "min_samples_leaf": lambda v: -v,
}


def tune_hyperparameter(
    panel: ExportPanel,
    param: str,
    grid: Sequence,
    design: TrainingDesign | Mapping[str, TrainingDesign],
    base_hp: Hyperparams,
    validation_actors: Sequence[str],
    eval_ctx,
    products: Sequence[str] | None = None,
    workers: int | None = None,
) -> TuneResult:
    """Grid-scan one hyperparameter, scoring validation activations.

    Returns the grid value with the highest validation best-F1; exact ties
    break toward the more regularized setting (smaller max_depth, larger
    min_samples_leaf).
    """
    import time

    from .evaluation import best_f1 as _best_f1
    from .evaluation import build_activation_testset, scores_for
    from .networks import ScoreMatrix

    if not grid:
        raise ValidationError("tuning grid must be nonempty")
    if isinstance(design, Mapping):
        base_design = next(iter(design.values()))
    else:
        base_design = design
    overlap = set(validation_actors) & set(base_design.train_actors)
    if overlap:
        raise ValidationError(
            f"validation actors overlap training actors: {sorted(overlap)[:5]}")
    products = list(products) if products is not None else list(panel.products)

    testset = build_activation_testset(
        panel, eval_ctx.level, eval_ctx.base_year, eval_ctx.test_year,
        eval_ctx.activation_threshold, validation_actors,
        eval_ctx.binarization_threshold)
    inputs = representation_matrix(
        panel, eval_ctx.base_year, base_design.representation,
        eval_ctx.binarization_threshold).restrict_rows(tuple(sorted(validation_actors)))

    rows: list[TuneRow] = []
    for v in grid:
        hp_v = replace(base_hp, **{param: v})
        t0 = time.perf_counter()
        models = train_forests(panel, products, design, hp_v, workers=workers,
                               binarization_threshold=eval_ctx.binarization_threshold)
        dt = time.perf_counter() - t0
        scores = score_matrix(models, inputs, panel.products)
        _, f1 = _best_f1(scores_for(scores, testset), testset.labels)
        rows.append(TuneRow(v, f1, dt))

    best = rows[0]
    key = _REGULARIZED_ORDER.get(param)
    for row in rows[1:]:
        if row.best_f1 > best.best_f1:
            best = row
        elif row.best_f1 == best.best_f1 and key is not None \
                and key(row.value) < key(best.value):
            best = row
    return TuneResult(param, best.value, rows)


def score_matrix(
    models: Mapping[str, ForestModel],
    inputs: ValueMatrix,
    products: Sequence[str],
):
    """Assemble per-product forest predictions into a full score matrix.

    Products without a model score 0 for every actor.
    """
    from .networks import ScoreMatrix

    values = np.zeros((len(inputs.row_labels), len(products)))
    for j, p in enumerate(products):
        model = models.get(p)
        if model is not None:
            values[:, j] = predict(model, inputs)
    return ScoreMatrix(inputs.row_labels, tuple(products), values)


# ---------------------------------------------------------------------------
# Persistence (bit-exact round trip)

def _header_dict(model: ForestModel) -> dict:
    d = model.design
    return {
        "format": 1,
        "product": model.product,
        "product_index": model.product_index,
        "hyperparams": {
            "n_trees": model.hyperparams.n_trees,
            "max_depth": model.hyperparams.max_depth,
            "min_samples_leaf": model.hyperparams.min_samples_leaf,
            "features_per_split": model.hyperparams.features_per_split,
            "bootstrap": model.hyperparams.bootstrap,
            "seed": model.hyperparams.seed,
        },
        "design": {
            "feature_years": list(d.feature_years),
            "lag": d.lag,
            "representation": d.representation.value,
            "train_actors": list(d.train_actors),
            "feature_products": (None if d.feature_products is None
                                 else list(d.feature_products)),
        },
    }


def save_forest(model: ForestModel, dest) -> None:
    """Write one forest: magic, JSON header line, preorder node arrays."""
    own = isinstance(dest, str)
    f = open(dest, "wb") if own else dest
    try:
        f.write(FOREST_MAGIC)
        f.write(json.dumps(_header_dict(model), sort_keys=True).encode() + b"\n")
        for tree in model.trees:
            f.write(struct.pack("<I", tree.n_nodes))
            f.write(tree.feature.astype("<i4").tobytes())
            f.write(tree.threshold.astype("<f8").tobytes())
            f.write(tree.left.astype("<i4").tobytes())
            f.write(tree.right.astype("<i4").tobytes())
            f.write(tree.value.astype("<f8").tobytes())
            f.write(tree.n_node_samples.astype("<i8").tobytes())
    finally:
        if own:
            f.close()


def load_forest(source) -> ForestModel:
    own = isinstance(source, str)
    f = open(source, "rb") if own else source
    try:
        magic = f.read(len(FOREST_MAGIC))
        if magic != FOREST_MAGIC:
            raise SchemaError(f"bad forest magic {magic!r}")
        header = json.loads(f.readline().decode())
        if header.get("format") != 1:
            raise SchemaError(f"unsupported forest format {header.get('format')}")
        hp = Hyperparams(**header["hyperparams"])
        dsg = header["design"]
        design = TrainingDesign(
            feature_years=tuple(dsg["feature_years"]),
            lag=dsg["lag"],
            representation=Representation(dsg["representation"]),
            train_actors=tuple(dsg["train_actors"]),
            feature_products=(None if dsg["feature_products"] is None
                              else tuple(dsg["feature_products"])),
        )
        trees = []
        for _ in range(hp.n_trees):
            (n,) = struct.unpack("<I", f.read(4))
            feature = np.frombuffer(f.read(4 * n), dtype="<i4").astype(np.int32)
            threshold = np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64)
            left = np.frombuffer(f.read(4 * n), dtype="<i4").astype(np.int32)
            right = np.frombuffer(f.read(4 * n), dtype="<i4").astype(np.int32)
            value = np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64)
            nsamp = np.frombuffer(f.read(8 * n), dtype="<i8").astype(np.int64)
            trees.append(DecisionTree(feature, threshold, left, right, value, nsamp))
        return ForestModel(header["product"], header["product_index"],
                           tuple(trees), design, hp)
    finally:
        if own:
            f.close()


def save_forest_bundle(models: Mapping[str, ForestModel], dest: str) -> None:
    """Zip archive of per-product forest files with frozen metadata."""
    with zipfile.ZipFile(dest, "w", compression=zipfile.ZIP_STORED) as z:
        for p in sorted(models):
            buf = io.BytesIO()
            save_forest(models[p], buf)
            info = zipfile.ZipInfo(f"{p}.forest", date_time=(1980, 1, 1, 0, 0, 0))
            z.writestr(info, buf.getvalue())


def load_forest_bundle(source: str) -> dict[str, ForestModel]:
    out = {}
    with zipfile.ZipFile(source) as z:
        for name in sorted(z.namelist()):
            with z.open(name) as f:
                model = load_forest(io.BytesIO(f.read()))
            out[model.product] = model
    return out
