"""Desk-scale model comparison: forests vs networks vs autocorrelation.

Runs the four relatedness models on one synthetic firm world through the
pipeline API, prints a comparison table, and writes the radar-ready CSV
normalized against the product space (the benchmark convention).
"""

import os
import tempfile

from rlab import Hyperparams, RunConfig, run_pipeline, write_radar_csv, write_reports_csv
from rlab.synthetic import WorldConfig, generate_world, write_world

workdir = tempfile.mkdtemp(prefix="rlab_demo_")
world = generate_world(WorldConfig(n_firms=900, products_per_block=16,
                                   n_blocks=6, mean_firms_per_country=60,
                                   n_years=12, lag=3), seed=2)
paths = write_world(world, os.path.join(workdir, "world"))
print(f"world written to {paths['firm_panel']}")

first = world.config.first_year
base = world.default_base_year
last = world.firm_panel.years[-1]

reports = {}
for model in ("rca-baseline", "product-space", "taxonomy", "forest"):
    cfg = RunConfig(
        firm_panel=paths["firm_panel"], level="firm",
        train_window=(first, base), feature_years=(first, base - world.config.lag),
        lag=world.config.lag, base_year=base, test_year=last,
        split_sizes=(400, 200, 300), seed=2, model=model,
        hyperparams=Hyperparams(n_trees=20, min_samples_leaf=15, seed=2),
        k=500, k_per_actor=5, out=os.path.join(workdir, model),
        save_models=False)
    reports[model] = run_pipeline(cfg).report

print(f"\n{'model':>15} {'best-F1':>8} {'PR-AUC':>8} {'ROC-AUC':>8} "
      f"{'P@500':>8} {'mP@5':>8} {'MCC':>8}")
for name, r in reports.items():
    print(f"{name:>15} {r.best_f1:8.3f} {r.auc_pr:8.3f} {r.roc_auc:8.3f} "
          f"{r.precision_at_k:8.3f} {r.mean_precision_at_k:8.3f} {r.mcc:8.3f}")

table = os.path.join(workdir, "comparison.csv")
radar = os.path.join(workdir, "radar.csv")
write_reports_csv(reports, table)
write_radar_csv(reports, "product-space", radar)
print(f"\ncomparison table: {table}")
print(f"radar CSV (normalized to product-space): {radar}")
