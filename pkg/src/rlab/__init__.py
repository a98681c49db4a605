"""Relatedness between economic actors and products.

Implements and compares co-occurrence network measures (Product Space,
Taxonomy Network) and per-product random-forest predictors, validated by
an out-of-sample activation forecast with a full imbalanced-classification
metric suite, plus synthetic firm-like and country-like worlds with
planted ground truth.
"""

from .core_data import (
    ActorLevel,
    BinaryMatrix,
    ExportPanel,
    ProductHierarchy,
    SplitAssignment,
    ValueMatrix,
    aggregate_years,
    emit_csv,
    filter_actors,
    ingest_csv,
    read_cache,
    restrict_products,
    split_actors,
    write_cache,
    year_slice,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    ParseError,
    RangeError,
    RlabError,
    SchemaError,
    SizeError,
    ValidationError,
)
from .evaluation import (
    Confusion,
    EvalContext,
    MetricsReport,
    TestSet,
    best_f1,
    build_activation_testset,
    f1_score,
    mcc,
    mean_precision_at_k,
    pr_auc,
    precision_at_k,
    precision_recall_at,
    report,
    roc_auc,
    scores_for,
    write_radar_csv,
    write_reports_csv,
)
from .forest import (
    DecisionTree,
    ForestModel,
    Hyperparams,
    Representation,
    TrainingDesign,
    TuneResult,
    build_training_set,
    load_forest,
    load_forest_bundle,
    predict,
    representation_matrix,
    representation_rule,
    save_forest,
    save_forest_bundle,
    score_matrix,
    train_forest,
    train_forests,
    train_tree,
    tune_hyperparameter,
)
from .networks import (
    NetworkKind,
    ProximityMatrix,
    ScoreMatrix,
    density,
    network_pipeline,
    product_space,
    taxonomy_network,
)
from .partitions import (
    BipartiteGraph,
    HierarchyLevel,
    Partition,
    PartitionMethod,
    bipartite_modularity,
    brim,
    brim_squared,
    hs_partition,
    restrict_features,
)
from .pipeline import (
    RunConfig,
    apply_overrides,
    run_cross_test,
    run_partition_sweep,
    run_pipeline,
    run_synth,
)
from .preprocess import MarginVector, binarize, diversification, rca, ubiquity
from .synthetic import (
    SyntheticWorld,
    WorldConfig,
    generate_world,
    nestedness_overlap,
    planted_oracle_scores,
    read_world_sidecar,
    write_world,
)

__version__ = "0.1.0"
