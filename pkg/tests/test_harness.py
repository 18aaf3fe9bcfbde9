import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activepaths import nn
from activepaths.data import SynthConfig, TriggerSpec
from activepaths.harness import cli
from activepaths.harness.config import (
    ConfigError, DataConfig, DetectConfig, EliminateConfig, ExperimentConfig, env_overrides,
)
from activepaths.harness.metrics import evaluate_predictions, split_metrics
from activepaths.harness.recipes import experiment_1, recipe
from activepaths.io_utils import sha256_hex


def small_config(out_dir, seed=2, trigger=True, **detect):
    return ExperimentConfig(
        name="small", seed=seed,
        data=DataConfig(synth=SynthConfig(n_rows=4000, malicious_fraction=0.05)),
        trigger=TriggerSpec({"TTL_max": 66.0}, poisoning_rate=0.02) if trigger else None,
        train=nn.TrainConfig(epochs=4),
        hidden_widths=(16, 8),
        detect=DetectConfig(**{"d": 4, "min_cluster_size": 20, **detect}),
        eliminate=EliminateConfig(remove_jointly_unused=False),
        out_dir=str(out_dir),
    )


def write_config(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)


# metrics ------------------------------------------------------------------

def test_perfect_and_constant_predictors():
    y = np.array([0, 0, 1, 1])
    m = split_metrics(y, y)
    assert (m.accuracy, m.benign_accuracy, m.malicious_accuracy) == (1.0, 1.0, 1.0)
    rep = evaluate_predictions(y, np.zeros(4), y, np.zeros(4))
    assert rep.clean.benign_accuracy == 1.0 and rep.clean.malicious_accuracy == 0.0
    assert rep.poison_accuracy == 1.0 and rep.n_poisoned_malicious == 2


def test_rate_undefined_without_rows():
    m = split_metrics(np.zeros(3, int), np.zeros(3, int))
    assert m.malicious_accuracy is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_confusion_marginals_property(pairs):
    y, p = map(np.array, zip(*pairs))
    m = split_metrics(y, p)
    cm = np.array(m.confusion)
    assert cm.sum() == len(y) and cm[1].sum() == y.sum() and cm[:, 1].sum() == p.sum()
    for r in (m.accuracy, m.benign_accuracy, m.malicious_accuracy):
        assert r is None or 0.0 <= r <= 1.0


# config -------------------------------------------------------------------

def test_config_roundtrip_and_hash(tmp_path):
    cfg = experiment_1()
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.hash == cfg.hash and back.to_dict() == cfg.to_dict()
    assert replace(cfg, out_dir="elsewhere").hash == cfg.hash
    assert cfg.with_overrides({"detect.d": 3}).hash != cfg.hash


def test_master_seed_propagates():
    cfg = experiment_1(seed=9)
    assert cfg.data.synth.seed == cfg.trigger.seed == cfg.train.seed == 9


def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        DataConfig(synth=None)
    with pytest.raises(ConfigError):
        DetectConfig(d=0)
    with pytest.raises(ConfigError):
        experiment_1().with_overrides({"detect.d.x": 1})


def test_env_overrides():
    env = {"ACTIVEPATHS_DETECT__D": "8", "ACTIVEPATHS_NAME": "x y", "OTHER": "1"}
    assert env_overrides(env) == {"detect.d": 8, "name": "x y"}


# CLI ----------------------------------------------------------------------

def test_usage_errors(tmp_path, capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["train", "--recipe", "nope"]) == cli.EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus": 1}')
    assert cli.main(["train", "--config", str(bad)]) == cli.EXIT_USAGE


def test_data_errors(tmp_path):
    cfg = small_config(tmp_path / "run")
    assert cli.main(["detect", "--config", write_config(tmp_path, cfg)]) == cli.EXIT_DATA
    csv_cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "data": {"csv": str(tmp_path / "missing.csv"),
                                                                   "schema": str(tmp_path / "s.json")}})
    assert cli.main(["train", "--config", write_config(tmp_path, csv_cfg)]) == cli.EXIT_DATA


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    cfg = small_config(root / "run")
    path = root / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    codes = [cli.main([cmd, "--config", str(path)]) for cmd in ("train", "detect")]
    model_before = (root / "run" / "model.apnn").read_bytes()
    codes.append(cli.main(["eliminate", "--config", str(path), "--features", "TTL_max"]))
    codes.append(cli.main(["report", "--out-dir", str(root / "run")]))
    return root, cfg, codes, model_before


def test_small_pipeline_artifacts(small_run):
    root, cfg, codes, model_before = small_run
    run = root / "run"
    assert codes == [0, 0, 0, 0]
    for name in ("config.json", "model.apnn", "encoder.json", "train_report.json", "detect_report.json",
                 "embedding.csv", "cluster_diff.json", "ranked_features.csv", "plan.json",
                 "model_eliminated.apnn", "eliminate_report.json"):
        assert (run / name).exists(), name
    for name in ("train_report.json", "detect_report.json", "eliminate_report.json", "plan.json"):
        d = json.loads((run / name).read_text())
        assert d["config_hash"] == cfg.hash and d["seed"] == cfg.seed and d["schema_version"] == 1
    # input model untouched
    assert (run / "model.apnn").read_bytes() == model_before
    header = (run / "embedding.csv").read_text().splitlines()[0]
    assert header == "sample_id,coord_1,coord_2,coord_3,coord_4,label"
    enc = json.loads((run / "encoder.json").read_text())["encoder"]
    assert enc["fitted_on"] == "train"


def test_summary_references_artifacts_and_matches_json(small_run):
    root, _, _, _ = small_run
    run = root / "run"
    summary = (run / "report" / "summary.md").read_text()
    assert "## Missing" not in summary
    for name in ("model.apnn", "detect_report.json", "eliminate_report.json", "embedding.csv"):
        assert f"`{name}`" in summary
    ev = json.loads((run / "eliminate_report.json").read_text())["after"]
    assert json.dumps(ev["clean"]["accuracy"]) in summary
    grid = (run / "report" / "accuracy_grid.csv").read_text()
    assert json.dumps(ev["poisoned"]["malicious_accuracy"]) in grid


def test_partial_run_lists_missing(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps({"name": "p", "seed": 0, "config_hash": "h", "trigger": None}))
    cli.cmd_report(tmp_path)
    summary = (tmp_path / "report" / "summary.md").read_text()
    assert "## Missing" in summary and "`model.apnn`" in summary.split("## Missing")[1]


def test_insufficient_data_exit_code(small_run, tmp_path):
    root, cfg, _, _ = small_run
    big = small_config(root / "run", min_cluster_size=10**6)
    assert cli.main(["detect", "--config", write_config(tmp_path, big)]) == cli.EXIT_INSUFFICIENT


def test_empty_plan_leaves_model_unchanged(small_run, tmp_path):
    root, cfg, _, _ = small_run
    huge_t = cfg.with_overrides({"eliminate.T": 10**6})
    rep = cli.cmd_eliminate(huge_t)
    assert rep["empty_plan"] and rep["warning"]
    assert rep["before"] == rep["after"]


def test_env_override_reaches_command(small_run, tmp_path):
    root, cfg, _, _ = small_run
    args = cli.build_parser().parse_args(["detect", "--config", write_config(tmp_path, cfg)])
    resolved = cli.resolve_config(args, {"ACTIVEPATHS_DETECT__D": "3"})
    assert resolved.detect.d == 3 and resolved.hash != cfg.hash


def test_rerun_is_byte_identical(small_run, tmp_path):
    root, cfg, _, _ = small_run
    other = replace(cfg, out_dir=str(tmp_path / "again"))
    cli.cmd_train(other)
    cli.cmd_detect(other)
    for name in ("model.apnn", "train_report.json", "detect_report.json", "embedding.csv"):
        assert (tmp_path / "again" / name).read_bytes() == (root / "run" / name).read_bytes(), name


def test_synth_and_csv_source(tmp_path):
    cfg = small_config(tmp_path / "gen")
    assert cli.main(["synth", "--config", write_config(tmp_path, cfg)]) == 0
    idx = json.loads((tmp_path / "gen" / "poison_index.json").read_text())
    assert len(idx["row_ids"]) == 80 and sum(idx["original_labels"]) == 40
    csv_cfg = ExperimentConfig.from_dict({
        **cfg.to_dict(), "out_dir": str(tmp_path / "fromcsv"),
        "data": {"csv": str(tmp_path / "gen" / "data.csv"), "schema": str(tmp_path / "gen" / "schema.json")}})
    rep = cli.cmd_train(csv_cfg)
    ref = cli.cmd_train(replace(cfg, out_dir=str(tmp_path / "direct")))
    # same rows and seed, so the same model whichever way the data arrives
    assert rep["model_hash"] == ref["model_hash"]


def test_recipe_lookup():
    assert recipe("experiment-2", 3).trigger.assignments == {"TTL_max": 66.0, "TTL_min": 61.0}
    with pytest.raises(KeyError):
        recipe("nope")
