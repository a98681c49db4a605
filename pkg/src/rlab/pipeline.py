"""End-to-end runs: configuration, orchestration, and artifact output.

Every run derives all randomness from the config seed and writes a
deterministic `report.json`; wall-clock stage timings go to a separate
`timings.json` so reports are byte-reproducible across reruns and worker
counts.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

from .core_data import (
    ActorLevel,
    ExportPanel,
    ProductHierarchy,
    SplitAssignment,
    aggregate_years,
    ingest_csv,
    read_cache,
    restrict_products,
    split_actors,
    year_slice,
)
from .errors import ConfigError, SchemaError
from .evaluation import (
    EvalContext,
    MetricsReport,
    build_activation_testset,
    report,
    write_reports_csv,
)
from .forest import (
    Hyperparams,
    Representation,
    TrainingDesign,
    representation_matrix,
    representation_rule,
    score_matrix,
    train_forests,
    tune_hyperparameter,
    save_forest_bundle,
)
from .networks import NetworkKind, ScoreMatrix, network_pipeline
from .partitions import (
    HierarchyLevel,
    Partition,
    brim,
    brim_squared,
    hs_partition,
    restrict_features,
)
from .preprocess import binarize, rca
from .synthetic import WorldConfig, generate_world, write_world

logger = logging.getLogger("rlab")

MODEL_KINDS = ("rca-baseline", "product-space", "taxonomy", "forest")


@dataclass
class RunConfig:
    """Everything a pipeline run needs; JSON-loadable with flag overrides."""

    firm_panel: str | None = None
    country_panel: str | None = None
    level: str = "firm"
    train_window: tuple[int, int] = (1996, 2012)
    feature_years: tuple[int, int] = (1996, 2007)
    lag: int = 5
    base_year: int = 2012
    test_year: int = 2017
    binarization_threshold: float = 1.0
    activation_threshold: float = 0.25
    split_sizes: tuple[int, int, int] = (20000, 20000, 31826)
    seed: int = 0
    model: str = "forest"
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    partition_method: str = "none"
    brim_k_max: int = 50
    brim_restarts: int = 10
    k: int = 1000
    k_per_actor: int = 5
    workers: int | None = None
    out: str = "runs/out"
    save_models: bool = True
    save_scores: bool = False

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODEL_KINDS}")
        if self.level not in ("firm", "country"):
            raise ConfigError(f"level must be 'firm' or 'country', got {self.level!r}")
        if self.binarization_threshold <= 0 or self.activation_threshold <= 0:
            raise ConfigError("thresholds must be > 0")
        if self.base_year + self.lag != self.test_year:
            raise ConfigError(
                f"base_year + lag must equal test_year "
                f"({self.base_year} + {self.lag} != {self.test_year})")
        f0, f1 = self.feature_years
        if f0 > f1:
            raise ConfigError("feature_years must be (first, last) with first <= last")
        if f1 + self.lag > self.train_window[1]:
            raise ConfigError("feature labels would leave the training window")
        if any(s < 0 for s in self.split_sizes):
            raise ConfigError("split sizes must be >= 0")

    @property
    def actor_level(self) -> ActorLevel:
        return ActorLevel(self.level)

    @property
    def feature_year_list(self) -> tuple[int, ...]:
        return tuple(range(self.feature_years[0], self.feature_years[1] + 1))

    def eval_context(self, level: ActorLevel | None = None) -> EvalContext:
        return EvalContext(
            level=level or self.actor_level,
            base_year=self.base_year,
            test_year=self.test_year,
            activation_threshold=self.activation_threshold,
            binarization_threshold=self.binarization_threshold,
            ks=(self.k, self.k_per_actor),
        )

    def to_dict(self, for_metadata: bool = False) -> dict:
        d = asdict(self)
        d["train_window"] = list(self.train_window)
        d["feature_years"] = list(self.feature_years)
        d["split_sizes"] = list(self.split_sizes)
        if for_metadata:
            # execution-only knobs; results are independent of them by the
            # determinism contract, and reports must be byte-stable across
            # worker counts and output locations
            d.pop("workers")
            d.pop("out")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "hyperparams" in data and isinstance(data["hyperparams"], dict):
            data["hyperparams"] = Hyperparams(**data["hyperparams"])
        for key in ("train_window", "feature_years", "split_sizes"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e


def apply_overrides(config: RunConfig, overrides: Sequence[str]) -> RunConfig:
    """Apply `--set key=value` pairs; dotted keys reach into hyperparams."""
    data = config.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        target = data
        for part in parts[:-1]:
            if part not in target or not isinstance(target[part], dict):
                raise ConfigError(f"unknown config section {part!r} in {key!r}")
            target = target[part]
        if parts[-1] not in target:
            raise ConfigError(f"unknown config key {key!r}")
        target[parts[-1]] = value
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Data loading and shared pieces

def load_panel(path: str) -> ExportPanel:
    """Read a panel from CSV or from the binary cache (by extension)."""
    if not os.path.exists(path):
        raise SchemaError(f"panel file not found: {path}")
    if path.endswith(".rlab"):
        return read_cache(path)
    return ingest_csv(path)


def _panel_for(config: RunConfig, level: ActorLevel) -> ExportPanel:
    path = config.firm_panel if level is ActorLevel.FIRM else config.country_panel
    if path is None:
        raise ConfigError(f"no {level.value} panel configured")
    return load_panel(path)


def _split_for(config: RunConfig, panel: ExportPanel, level: ActorLevel) -> SplitAssignment:
    if level is ActorLevel.COUNTRY:
        return SplitAssignment.all_actors(panel.actors)
    return split_actors(panel.actors, config.split_sizes, config.seed)


def resolve_partition(config: RunConfig, panel: ExportPanel) -> Partition | None:
    """Build the configured product partition (None means no restriction)."""
    method = config.partition_method
    if method == "none":
        return None
    if method in ("section", "chapter"):
        level = HierarchyLevel(method)
        return hs_partition(ProductHierarchy.hs1992(), level, panel.products)
    if method in ("brim", "brim2"):
        total = aggregate_years(panel, *config.train_window)
        M = binarize(rca(total), config.binarization_threshold)
        fn = brim if method == "brim" else brim_squared
        return fn(M, k_max=config.brim_k_max, restarts=config.brim_restarts,
                  seed=config.seed)
    if method.endswith(".csv"):
        return Partition.from_csv(method)
    raise ConfigError(f"unknown partition method {method!r}")


def _forest_scores(
    config: RunConfig,
    panel: ExportPanel,
    representation: Representation,
    train_actors: tuple[str, ...],
    score_panel: ExportPanel,
    score_actors: tuple[str, ...],
    partition: Partition | None,
    timings: dict,
) -> ScoreMatrix:
    design = TrainingDesign(
        feature_years=config.feature_year_list,
        lag=config.lag,
        representation=representation,
        train_actors=train_actors,
    )
    designs = restrict_features(design, partition) if partition is not None else design
    t0 = time.perf_counter()
    models = train_forests(panel, panel.products, designs, config.hyperparams,
                           workers=config.workers,
                           binarization_threshold=config.binarization_threshold)
    timings["train"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    inputs = representation_matrix(score_panel, config.base_year, representation,
                                   config.binarization_threshold
                                   ).restrict_rows(score_actors)
    scores = score_matrix(models, inputs, score_panel.products)
    timings["score"] = time.perf_counter() - t0
    timings["_models"] = models  # plucked off before serialization
    return scores


@dataclass
class PipelineResult:
    report: MetricsReport
    scores: ScoreMatrix
    paths: dict[str, str]
    models: dict | None = None


def _write_artifacts(config: RunConfig, result: PipelineResult) -> None:
    outdir = config.out
    os.makedirs(outdir, exist_ok=True)
    paths = result.paths
    paths["report"] = os.path.join(outdir, "report.json")
    with open(paths["report"], "w", encoding="utf-8") as f:
        f.write(result.report.to_json(include_timings=False))
    paths["timings"] = os.path.join(outdir, "timings.json")
    with open(paths["timings"], "w", encoding="utf-8") as f:
        json.dump({"workers": config.workers, **result.report.timings},
                  f, sort_keys=True, indent=2)
        f.write("\n")
    if config.save_scores:
        paths["scores"] = os.path.join(outdir, "scores.csv")
        result.scores.to_csv(paths["scores"])
    if result.models and config.save_models:
        paths["models"] = os.path.join(outdir, "models.rlabf")
        save_forest_bundle(result.models, paths["models"])


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Ingest, preprocess, score with the configured model, evaluate, write."""
    config.validate()
    level = config.actor_level
    timings: dict = {}
    wall0 = time.perf_counter()

    t0 = time.perf_counter()
    panel = _panel_for(config, level)
    timings["ingest"] = time.perf_counter() - t0
    split = _split_for(config, panel, level)
    test_actors = split.test_actors

    models = None
    if config.model == "rca-baseline":
        t0 = time.perf_counter()
        R = rca(year_slice(panel, config.base_year)).restrict_rows(test_actors)
        scores = ScoreMatrix(R.row_labels, R.col_labels, R.values)
        timings["score"] = time.perf_counter() - t0
    elif config.model in ("product-space", "taxonomy"):
        kind = (NetworkKind.PRODUCT_SPACE if config.model == "product-space"
                else NetworkKind.TAXONOMY)
        t0 = time.perf_counter()
        scores = network_pipeline(
            panel, kind, config.train_window, config.base_year, test_actors,
            binarization_threshold=config.binarization_threshold)
        timings["score"] = time.perf_counter() - t0
    else:
        partition = resolve_partition(config, panel)
        scores = _forest_scores(
            config, panel, Representation.RCA, split.train_actors,
            panel, test_actors, partition, timings)
        models = timings.pop("_models")

    t0 = time.perf_counter()
    testset = build_activation_testset(
        panel, level, config.base_year, config.test_year,
        config.activation_threshold, test_actors, config.binarization_threshold)
    rep = report(
        scores, testset, ks=(config.k, config.k_per_actor),
        metadata={
            "model": config.model,
            "train_level": level.value,
            "test_level": level.value,
            "representation": Representation.RCA.value,
            "partition_method": config.partition_method,
            "config": config.to_dict(for_metadata=True),
        })
    timings["evaluate"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - wall0
    rep.timings = timings

    result = PipelineResult(rep, scores, {}, models)
    _write_artifacts(config, result)
    logger.info("pipeline %s/%s: best_f1=%.4f", config.model, level.value,
                rep.best_f1)
    return result


def run_cross_test(
    config: RunConfig,
    train_level: ActorLevel,
    test_level: ActorLevel,
) -> PipelineResult:
    """Train a forest on one data level and evaluate on the other.

    Both panels are restricted to their shared product set; cross-level
    pairs use the binary representation for features and inputs.
    """
    config.validate()
    timings: dict = {}
    wall0 = time.perf_counter()

    t0 = time.perf_counter()
    train_panel = _panel_for(config, train_level)
    test_panel = _panel_for(config, test_level)
    shared = sorted(set(train_panel.products) & set(test_panel.products))
    if not shared:
        raise SchemaError("panels share no products")
    if tuple(shared) != train_panel.products:
        train_panel = restrict_products(train_panel, shared)
    if tuple(shared) != test_panel.products:
        test_panel = restrict_products(test_panel, shared)
    timings["ingest"] = time.perf_counter() - t0

    representation = representation_rule(train_level, test_level)
    train_split = _split_for(config, train_panel, train_level)
    if train_level is test_level:
        test_actors = train_split.test_actors
    else:
        test_actors = _split_for(config, test_panel, test_level).test_actors

    partition = resolve_partition(config, train_panel)
    scores = _forest_scores(
        config, train_panel, representation, train_split.train_actors,
        test_panel, test_actors, partition, timings)
    models = timings.pop("_models")

    t0 = time.perf_counter()
    testset = build_activation_testset(
        test_panel, test_level, config.base_year, config.test_year,
        config.activation_threshold, test_actors, config.binarization_threshold)
    rep = report(
        scores, testset, ks=(config.k, config.k_per_actor),
        metadata={
            "model": "forest",
            "train_level": train_level.value,
            "test_level": test_level.value,
            "representation": representation.value,
            "partition_method": config.partition_method,
            "config": config.to_dict(for_metadata=True),
        })
    # the grouped comparison benchmarks the cross forest against a product
    # space built on the test level itself
    ps_scores = network_pipeline(
        test_panel, NetworkKind.PRODUCT_SPACE, config.train_window,
        config.base_year, test_actors,
        binarization_threshold=config.binarization_threshold)
    ps_rep = report(ps_scores, testset, ks=(config.k, config.k_per_actor),
                    metadata={"model": "product-space",
                              "train_level": test_level.value,
                              "test_level": test_level.value})
    timings["evaluate"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - wall0
    rep.timings = timings

    result = PipelineResult(rep, scores, {}, models)
    _write_artifacts(config, result)
    result.paths["comparison"] = os.path.join(config.out, "comparison.csv")
    write_reports_csv(
        {f"forest[{train_level.value}->{test_level.value}]": rep,
         f"product-space[{test_level.value}]": ps_rep},
        result.paths["comparison"])
    return result


@dataclass
class SweepRow:
    method: str
    n_blocks: int
    tuned_param: str
    tuned_value: object
    train_seconds: float
    best_f1: float


def run_partition_sweep(
    config: RunConfig,
    methods: Sequence[str],
    tuned_param: str = "min_samples_leaf",
    grid: Sequence = (1,),
) -> list[SweepRow]:
    """Tune, train, and evaluate a forest per partition method (Fig.-5 data)."""
    config.validate()
    level = config.actor_level
    panel = _panel_for(config, level)
    split = _split_for(config, panel, level)
    rows: list[SweepRow] = []
    for method in methods:
        cfg = replace(config, partition_method=method)
        partition = resolve_partition(cfg, panel)
        n_blocks = partition.n_blocks if partition is not None else 1
        design = TrainingDesign(
            feature_years=config.feature_year_list, lag=config.lag,
            representation=Representation.RCA, train_actors=split.train_actors)
        designs = (restrict_features(design, partition)
                   if partition is not None else design)
        if len(grid) == 1:
            best_value = grid[0]
        else:
            tune = tune_hyperparameter(
                panel, tuned_param, list(grid), designs, config.hyperparams,
                split.validation_actors, config.eval_context(),
                workers=config.workers)
            best_value = tune.best_value
        hp = replace(config.hyperparams, **{tuned_param: best_value})

        t0 = time.perf_counter()
        models = train_forests(panel, panel.products, designs, hp,
                               workers=config.workers,
                               binarization_threshold=config.binarization_threshold)
        train_seconds = time.perf_counter() - t0
        inputs = representation_matrix(panel, config.base_year, Representation.RCA,
                                       config.binarization_threshold
                                       ).restrict_rows(split.test_actors)
        scores = score_matrix(models, inputs, panel.products)
        testset = build_activation_testset(
            panel, level, config.base_year, config.test_year,
            config.activation_threshold, split.test_actors,
            config.binarization_threshold)
        rep = report(scores, testset, ks=(config.k, config.k_per_actor))
        rows.append(SweepRow(method, n_blocks, tuned_param, best_value,
                             train_seconds, rep.best_f1))
        logger.info("sweep %s: blocks=%d best_f1=%.4f t=%.1fs",
                    method, n_blocks, rep.best_f1, train_seconds)

    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, "partition_sweep.csv")
    with open(path, "w", encoding="utf-8", newline="") as f:
        import csv as _csv

        w = _csv.writer(f, lineterminator="\n")
        w.writerow(["method", "n_blocks", "tuned_param", "tuned_value",
                    "train_seconds", "best_f1"])
        for r in rows:
            w.writerow([r.method, r.n_blocks, r.tuned_param, r.tuned_value,
                        repr(r.train_seconds), repr(r.best_f1)])
    return rows


def run_synth(world_config: WorldConfig | str, out: str,
              seed: int | None = None) -> dict[str, str]:
    """Generate a synthetic world and write its panels and sidecar."""
    if isinstance(world_config, str):
        try:
            with open(world_config, encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"world config not found: {world_config}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"world config is not valid JSON: {e}") from e
        try:
            world_config = WorldConfig(**raw)
        except TypeError as e:
            raise ConfigError(f"bad world config: {e}") from e
    world = generate_world(world_config, seed=seed)
    return write_world(world, out)
