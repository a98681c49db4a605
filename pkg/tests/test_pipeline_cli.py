import json
import os
from dataclasses import replace

import numpy as np
import pytest

from rlab import (
    ActorLevel,
    ConfigError,
    Hyperparams,
    RunConfig,
    apply_overrides,
    rca,
    run_cross_test,
    run_partition_sweep,
    run_pipeline,
    run_synth,
    year_slice,
)
from rlab.cli import main
from rlab.pipeline import load_panel, resolve_partition
from rlab.synthetic import WorldConfig, generate_world, write_world

WORLD = WorldConfig(n_blocks=4, products_per_block=8, n_firms=240,
                    mean_firms_per_country=12, n_years=10, lag=3,
                    activation_rate=0.3, noise_rate=0.03, generalist_frac=0.08)


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    world = generate_world(WORLD, seed=13)
    write_world(world, str(out))
    return out


def base_config(world_dir, out_dir, **kw):
    first, last = WORLD.first_year, WORLD.first_year + WORLD.n_years - 1
    base = last - WORLD.lag
    defaults = dict(
        firm_panel=str(world_dir / "firm_panel.csv"),
        country_panel=str(world_dir / "country_panel.csv"),
        level="firm",
        train_window=(first, base),
        feature_years=(first, base - WORLD.lag),
        lag=WORLD.lag,
        base_year=base,
        test_year=last,
        split_sizes=(60, 40, 50),
        seed=3,
        model="rca-baseline",
        hyperparams=Hyperparams(n_trees=3, min_samples_leaf=4, seed=3),
        k=50,
        k_per_actor=3,
        out=str(out_dir),
    )
    defaults.update(kw)
    return RunConfig(**defaults)


# --- RunConfig ------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(model="boost").validate()
    with pytest.raises(ConfigError):
        RunConfig(base_year=2012, lag=5, test_year=2016).validate()
    with pytest.raises(ConfigError):
        RunConfig(feature_years=(1996, 2010), lag=5,
                  train_window=(1996, 2012)).validate()
    RunConfig().validate()  # paper defaults are consistent


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": "taxonomy", "seed": 5,
                                "hyperparams": {"n_trees": 7}}))
    cfg = RunConfig.from_file(str(path))
    assert cfg.model == "taxonomy"
    assert cfg.hyperparams.n_trees == 7
    cfg2 = apply_overrides(cfg, ["model=forest", "hyperparams.n_trees=9",
                                 "split_sizes=[5,4,3]"])
    assert cfg2.model == "forest"
    assert cfg2.hyperparams.n_trees == 9
    assert cfg2.split_sizes == (5, 4, 3)
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["betterness=9"])


def test_config_unknown_key():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"modle": "forest"})


# --- pipelines ------------------------------------------------------------------

def test_pipeline_rca_baseline_scores_are_rca(world_dir, tmp_path):
    cfg = base_config(world_dir, tmp_path / "run")
    result = run_pipeline(cfg)
    panel = load_panel(cfg.firm_panel)
    from rlab import split_actors

    split = split_actors(panel.actors, cfg.split_sizes, cfg.seed)
    R = rca(year_slice(panel, cfg.base_year)).restrict_rows(split.test)
    np.testing.assert_array_equal(result.scores.values, R.values)
    assert os.path.exists(result.paths["report"])
    assert os.path.exists(result.paths["timings"])
    assert result.report.metadata["config"]["model"] == "rca-baseline"


def test_pipeline_reports_are_reproducible(world_dir, tmp_path):
    r1 = run_pipeline(base_config(world_dir, tmp_path / "a"))
    r2 = run_pipeline(base_config(world_dir, tmp_path / "b"))
    b1 = (tmp_path / "a" / "report.json").read_bytes()
    b2 = (tmp_path / "b" / "report.json").read_bytes()
    assert b1 == b2


def test_pipeline_network_and_forest_models(world_dir, tmp_path):
    reports = {}
    for model in ("product-space", "taxonomy", "forest"):
        cfg = base_config(world_dir, tmp_path / model, model=model)
        reports[model] = run_pipeline(cfg).report
    for model, rep in reports.items():
        assert 0 <= rep.best_f1 <= 1
        assert rep.metadata["model"] == model
    assert os.path.exists(tmp_path / "forest" / "models.rlabf")


def test_pipeline_country_level(world_dir, tmp_path):
    cfg = base_config(world_dir, tmp_path / "c", level="country",
                      model="product-space")
    rep = run_pipeline(cfg).report
    assert rep.metadata["train_level"] == "country"
    assert rep.n_pairs > 0


def test_cross_test_metadata_and_representation(world_dir, tmp_path):
    cfg = base_config(world_dir, tmp_path / "x", model="forest")
    result = run_cross_test(cfg, ActorLevel.FIRM, ActorLevel.COUNTRY)
    assert result.report.metadata["representation"] == "binary"
    assert result.report.metadata["train_level"] == "firm"
    assert result.report.metadata["test_level"] == "country"
    comparison = (tmp_path / "x" / "comparison.csv").read_text().splitlines()
    assert comparison[1].startswith("forest[firm->country],")
    assert comparison[2].startswith("product-space[country],")
    same = run_cross_test(cfg, ActorLevel.FIRM, ActorLevel.FIRM)
    assert same.report.metadata["representation"] == "rca"


def test_partition_sweep_rows(world_dir, tmp_path):
    cfg = base_config(world_dir, tmp_path / "sweep", model="forest")
    rows = run_partition_sweep(cfg, ["none", "chapter"], "min_samples_leaf", [4])
    assert [r.method for r in rows] == ["none", "chapter"]
    assert rows[0].n_blocks == 1
    assert rows[1].n_blocks == WORLD.n_blocks  # synthetic codes use one chapter per block
    assert os.path.exists(tmp_path / "sweep" / "partition_sweep.csv")


def test_resolve_partition_methods(world_dir, tmp_path):
    cfg = base_config(world_dir, tmp_path / "p")
    panel = load_panel(cfg.firm_panel)
    assert resolve_partition(cfg, panel) is None  # method "none"
    brim_part = resolve_partition(replace(cfg, partition_method="brim",
                                          brim_k_max=8, brim_restarts=3), panel)
    assert brim_part.n_blocks >= 1
    path = tmp_path / "ext.csv"
    brim_part.to_csv(str(path))
    ext = resolve_partition(replace(cfg, partition_method=str(path)), panel)
    np.testing.assert_array_equal(ext.blocks, brim_part.blocks)
    with pytest.raises(ConfigError):
        resolve_partition(replace(cfg, partition_method="voronoi"), panel)


def test_run_synth_writes_world(tmp_path):
    cfg_path = tmp_path / "world.json"
    cfg_path.write_text(json.dumps({
        "n_blocks": 3, "products_per_block": 6, "n_firms": 50,
        "mean_firms_per_country": 10, "n_years": 6, "lag": 2,
        "activation_rate": 0.2}))
    paths = run_synth(str(cfg_path), str(tmp_path / "w"), seed=2)
    panel = load_panel(paths["firm_panel"])
    assert len(panel.products) == 18
    with pytest.raises(ConfigError):
        run_synth(str(tmp_path / "missing.json"), str(tmp_path / "w2"))


# --- CLI ------------------------------------------------------------------------

def test_cli_ingest_and_cache(world_dir, tmp_path, capsys):
    cache = tmp_path / "panel.rlab"
    rc = main(["ingest", "--input", str(world_dir / "firm_panel.csv"),
               "--out", str(cache)])
    assert rc == 0
    assert "ingested" in capsys.readouterr().out
    panel = load_panel(str(cache))
    assert panel.n_entries > 0


def test_cli_synth_and_pipeline(tmp_path, capsys):
    world_cfg = tmp_path / "world.json"
    world_cfg.write_text(json.dumps({
        "n_blocks": 3, "products_per_block": 6, "n_firms": 60,
        "mean_firms_per_country": 12, "n_years": 7, "lag": 2,
        "activation_rate": 0.25}))
    rc = main(["synth", "--config", str(world_cfg), "--out", str(tmp_path / "w"),
               "--seed", "4"])
    assert rc == 0
    capsys.readouterr()

    run_cfg = tmp_path / "run.json"
    run_cfg.write_text(json.dumps({
        "firm_panel": str(tmp_path / "w" / "firm_panel.csv"),
        "level": "firm",
        "train_window": [2000, 2004],
        "feature_years": [2000, 2002],
        "lag": 2, "base_year": 2004, "test_year": 2006,
        "split_sizes": [25, 15, 20],
        "model": "rca-baseline", "k": 20, "k_per_actor": 2}))
    rc = main(["pipeline", "--config", str(run_cfg), "--out",
               str(tmp_path / "run"), "--seed", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert json.loads(out)["n_pairs"] > 0
    assert (tmp_path / "run" / "report.json").exists()


def test_cli_exit_code_config_error(tmp_path, capsys):
    run_cfg = tmp_path / "bad.json"
    run_cfg.write_text(json.dumps({"model": "nonesuch"}))
    rc = main(["pipeline", "--config", str(run_cfg), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_cli_exit_code_data_error(tmp_path, capsys):
    rc = main(["pipeline", "--set", "firm_panel=/nonexistent/panel.csv",
               "--set", "model=rca-baseline",
               "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "data error" in capsys.readouterr().err


def test_cli_partition_and_evaluate(world_dir, tmp_path, capsys):
    part_path = tmp_path / "part.csv"
    rc = main(["partition", "--panel", str(world_dir / "firm_panel.csv"),
               "--method", "chapter", "--out", str(part_path)])
    assert rc == 0
    assert part_path.exists()
    capsys.readouterr()

    # evaluate an RCA score matrix produced by hand
    panel = load_panel(str(world_dir / "firm_panel.csv"))
    base = WORLD.first_year + WORLD.n_years - 1 - WORLD.lag
    R = rca(year_slice(panel, base))
    scores_path = tmp_path / "scores.csv"
    R.to_csv(str(scores_path))
    report_path = tmp_path / "report.json"
    rc = main(["evaluate", "--scores", str(scores_path),
               "--panel", str(world_dir / "firm_panel.csv"),
               "--level", "firm", "--base-year", str(base),
               "--test-year", str(base + WORLD.lag),
               "--k", "50", "--k-per-actor", "2",
               "--out", str(report_path)])
    assert rc == 0
    rep = json.loads(report_path.read_text())
    assert rep["n_pairs"] > 0


def test_cli_tune_single_value(world_dir, tmp_path, capsys):
    run_cfg = tmp_path / "run.json"
    first, last = WORLD.first_year, WORLD.first_year + WORLD.n_years - 1
    base = last - WORLD.lag
    run_cfg.write_text(json.dumps({
        "firm_panel": str(world_dir / "firm_panel.csv"),
        "train_window": [first, base],
        "feature_years": [first, base - WORLD.lag],
        "lag": WORLD.lag, "base_year": base, "test_year": last,
        "split_sizes": [50, 30, 40], "model": "forest",
        "hyperparams": {"n_trees": 2, "seed": 1}, "k": 30, "k_per_actor": 2}))
    rc = main(["tune", "--config", str(run_cfg), "--param", "min_samples_leaf",
               "--grid", "4", "--out", str(tmp_path / "tune")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["best_value"] == 4
