"""Command-line entry point.

Subcommands: ingest, synth, pipeline, cross-test, partition-sweep, tune,
partition, evaluate.  Exit codes: 0 success, 2 config error, 3 data
error, 4 runtime error.  RLAB_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .core_data import ActorLevel, ingest_csv, write_cache
from .errors import ConfigError, DataError, RlabError
from .evaluation import build_activation_testset, report, write_reports_csv
from .networks import ScoreMatrix
from .pipeline import (
    RunConfig,
    apply_overrides,
    load_panel,
    resolve_partition,
    run_cross_test,
    run_partition_sweep,
    run_pipeline,
    run_synth,
)

logger = logging.getLogger("rlab")


def _setup_logging() -> None:
    level = os.environ.get("RLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config JSON file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config value")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, help="worker count")
    p.add_argument("--out", help="output directory")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.overrides:
        config = apply_overrides(config, args.overrides)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if getattr(args, "out", None) is not None:
        updates["out"] = args.out
    if updates:
        from dataclasses import replace

        config = replace(config, **updates)
    return config


def _parse_grid(raw: str) -> list:
    grid = []
    for token in raw.split(","):
        token = token.strip()
        if token.lower() in ("none", "null"):
            grid.append(None)
        else:
            grid.append(int(token))
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlab",
        description="Relatedness measures and activation forecasts for "
                    "actor-product export panels.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read a panel CSV and write the binary cache")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema", help="comma list like actor=col,product=col,...")

    p = sub.add_parser("synth", help="generate a synthetic world")
    p.add_argument("--config", help="world config JSON (defaults apply if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("pipeline", help="end-to-end run for one model kind")
    _add_common(p)

    p = sub.add_parser("cross-test", help="train on one level, test on the other")
    _add_common(p)
    p.add_argument("--train-level", choices=["firm", "country"], required=True)
    p.add_argument("--test-level", choices=["firm", "country"], required=True)

    p = sub.add_parser("partition-sweep",
                       help="tune/train/evaluate across partition methods")
    _add_common(p)
    p.add_argument("--methods", required=True,
                   help="comma list from none,section,chapter,brim,brim2,<file.csv>")
    p.add_argument("--tuned-param", default="min_samples_leaf",
                   choices=["min_samples_leaf", "max_depth"])
    p.add_argument("--grid", default="1", help="comma list; 'none' for unbounded")

    p = sub.add_parser("tune", help="grid-scan one hyperparameter on validation")
    _add_common(p)
    p.add_argument("--param", required=True,
                   choices=["min_samples_leaf", "max_depth", "n_trees"])
    p.add_argument("--grid", required=True)

    p = sub.add_parser("partition", help="compute a product partition")
    p.add_argument("--panel", required=True)
    p.add_argument("--method", required=True,
                   help="section, chapter, brim, or brim2")
    p.add_argument("--out", required=True)
    p.add_argument("--window", nargs=2, type=int, metavar=("Y0", "Y1"))
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="metric suite over an existing score matrix")
    p.add_argument("--scores", required=True, help="dense labeled score CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--level", choices=["firm", "country"], default="firm")
    p.add_argument("--base-year", type=int, required=True)
    p.add_argument("--test-year", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--k-per-actor", type=int, default=5)
    p.add_argument("--out", required=True)

    return parser


def _cmd_ingest(args) -> int:
    schema = None
    if args.schema:
        schema = dict(kv.split("=", 1) for kv in args.schema.split(","))
    panel = ingest_csv(args.input, schema)
    write_cache(panel, args.out)
    print(f"ingested {panel.n_entries} entries: {len(panel.actors)} actors, "
          f"{len(panel.products)} products, years "
          f"{panel.years[0] if panel.years else '-'}..{panel.years[-1] if panel.years else '-'}")
    return 0


def _cmd_synth(args) -> int:
    paths = run_synth(args.config if args.config else _default_world(),
                      args.out, seed=args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _default_world():
    from .synthetic import WorldConfig

    return WorldConfig()


def _cmd_pipeline(args) -> int:
    config = _load_config(args)
    result = run_pipeline(config)
    print(result.report.to_json(include_timings=False), end="")
    return 0


def _cmd_cross_test(args) -> int:
    config = _load_config(args)
    result = run_cross_test(config, ActorLevel(args.train_level),
                            ActorLevel(args.test_level))
    print(result.report.to_json(include_timings=False), end="")
    return 0


def _cmd_partition_sweep(args) -> int:
    config = _load_config(args)
    rows = run_partition_sweep(config, args.methods.split(","),
                               tuned_param=args.tuned_param,
                               grid=_parse_grid(args.grid))
    for r in rows:
        print(f"{r.method}: blocks={r.n_blocks} {r.tuned_param}={r.tuned_value} "
              f"train={r.train_seconds:.2f}s best_f1={r.best_f1:.4f}")
    return 0


def _cmd_tune(args) -> int:
    from .forest import Representation, TrainingDesign, tune_hyperparameter
    from .pipeline import _panel_for, _split_for

    config = _load_config(args)
    config.validate()
    level = config.actor_level
    panel = _panel_for(config, level)
    split = _split_for(config, panel, level)
    design = TrainingDesign(
        feature_years=config.feature_year_list, lag=config.lag,
        representation=Representation.RCA, train_actors=split.train_actors)
    result = tune_hyperparameter(
        panel, args.param, _parse_grid(args.grid), design, config.hyperparams,
        split.validation_actors, config.eval_context(), workers=config.workers)
    out = {"param": result.param, "best_value": result.best_value,
           "rows": [{"value": r.value, "best_f1": r.best_f1,
                     "train_seconds": r.train_seconds} for r in result.rows]}
    print(json.dumps(out, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "tune.json"), "w", encoding="utf-8") as f:
            json.dump(out, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


def _cmd_partition(args) -> int:
    from dataclasses import replace

    panel = load_panel(args.panel)
    window = tuple(args.window) if args.window else (panel.years[0], panel.years[-1])
    config = RunConfig(partition_method=args.method, brim_k_max=args.k_max,
                       brim_restarts=args.restarts, seed=args.seed,
                       train_window=window)
    partition = resolve_partition(config, panel)
    if partition is None:
        raise ConfigError("method 'none' produces no partition file")
    partition.to_csv(args.out)
    q = "" if partition.modularity is None else f" Q={partition.modularity:.4f}"
    print(f"{args.method}: {partition.n_blocks} blocks{q} -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    from .core_data import ValueMatrix

    panel = load_panel(args.panel)
    raw = ValueMatrix.from_csv(args.scores)
    scores = ScoreMatrix(raw.row_labels, raw.col_labels, raw.values)
    testset = build_activation_testset(
        panel, ActorLevel(args.level), args.base_year, args.test_year,
        args.threshold, test_actors=raw.row_labels)
    rep = report(scores, testset, ks=(args.k, args.k_per_actor),
                 metadata={"scores_file": args.scores})
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(rep.to_json())
    print(rep.to_json(), end="")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "pipeline": _cmd_pipeline,
    "cross-test": _cmd_cross_test,
    "partition-sweep": _cmd_partition_sweep,
    "tune": _cmd_tune,
    "partition": _cmd_partition,
    "evaluate": _cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error [{args.command}]: {e}", file=sys.stderr)
        return 3
    except RlabError as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 4
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error [{args.command}]: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
