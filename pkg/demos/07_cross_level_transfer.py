"""Does firm-level relatedness transfer to countries (and vice versa)?

Trains forests on each data level and evaluates on both, applying the
cross-level representation rule (RCA within a level, binary M across
levels).  The firm-trained model stays useful on countries; the
country-trained model collapses on firms.
"""

import os
import tempfile

from rlab import ActorLevel, Hyperparams, RunConfig, run_cross_test
from rlab.synthetic import WorldConfig, generate_world, write_world

workdir = tempfile.mkdtemp(prefix="rlab_cross_")
world = generate_world(WorldConfig(n_firms=900, products_per_block=16,
                                   n_blocks=6, mean_firms_per_country=45,
                                   n_years=12, lag=3), seed=4)
paths = write_world(world, os.path.join(workdir, "world"))

first = world.config.first_year
base = world.default_base_year
last = world.firm_panel.years[-1]
cfg = RunConfig(
    firm_panel=paths["firm_panel"], country_panel=paths["country_panel"],
    train_window=(first, base), feature_years=(first, base - world.config.lag),
    lag=world.config.lag, base_year=base, test_year=last,
    split_sizes=(400, 200, 300), seed=4, model="forest",
    hyperparams=Hyperparams(n_trees=20, min_samples_leaf=15, seed=4),
    k=300, k_per_actor=5, out=os.path.join(workdir, "runs"), save_models=False)

print(f"{'train -> test':>22} {'repr':>8} {'best-F1':>8} {'PR-AUC':>8}")
for train in (ActorLevel.FIRM, ActorLevel.COUNTRY):
    for test in (ActorLevel.FIRM, ActorLevel.COUNTRY):
        cfg.out = os.path.join(workdir, f"{train.value}-{test.value}")
        rep = run_cross_test(cfg, train, test).report
        print(f"{train.value:>10} -> {test.value:<8} "
              f"{rep.metadata['representation']:>8} "
              f"{rep.best_f1:8.3f} {rep.auc_pr:8.3f}")

print("\nreading: forests trained on the level they predict win; "
      "firm-trained models still transfer to countries, the reverse does not.")
