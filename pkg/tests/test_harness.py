import json
import math

import numpy as np
import pytest

from mlc.harness import cli
from mlc.harness.config import ConfigError, ExperimentConfig, load_config
from mlc.harness.export import export_report, export_sweep, read_csv
from mlc.harness.runner import accuracy_auc, correction_analysis, run_experiment, run_sweep
from mlc.metrics import confusion_from_predictions, evaluate
from mlc.models import Classifier, ClassifierConfig
from mlc.data import LabeledSet

SMALL = {
    "run_id": "small",
    "seed": 1,
    "dataset": {"kind": "blobs", "num_classes": 3, "dim": 2, "per_class": 200, "spread": 0.8},
    "split": {"clean_count": 90, "test_count": 150},
    "noise": {"kind": "FLIP", "rho": 0.5},
    "classifier": {"hidden_dims": [8]},
    "lcn": {"hidden_dim": 8, "label_embed_dim": 8},
    "train": {"epochs": 3, "batch_size_noisy": 50, "batch_size_clean": 20, "k": 2},
}


@pytest.fixture
def small_cfg():
    return ExperimentConfig.from_dict(SMALL)


@pytest.fixture(scope="module")
def small_report():
    return run_experiment(ExperimentConfig.from_dict(SMALL))


# --- config -------------------------------------------------------------------

def test_defaults_fill_in():
    cfg = ExperimentConfig.from_dict({"run_id": "x"})
    assert cfg.method == "mlc" and cfg.noise.kind == "FLIP" and cfg.train.k == 5
    assert cfg.train.meta_lr == 0.03


def test_roundtrip(small_cfg):
    again = ExperimentConfig.from_dict(small_cfg.to_dict())
    assert again == small_cfg
    assert "seed" not in small_cfg.to_dict()["train"]


@pytest.mark.parametrize(
    "patch, match",
    [
        ({"bogus": 1}, "unknown keys"),
        ({"method": "magic"}, "method"),
        ({"noise": {"kind": "GAUSS"}}, "GAUSS"),
        ({"noise": {"rho": 1.5}}, "rho"),
        ({"train": {"k": 0}}, "k"),
        ({"train": {"seed": 3}}, "seed"),
        ({"dataset": {"kind": "csv"}}, "path"),
    ],
)
def test_invalid_configs_rejected(patch, match):
    raw = {**SMALL, **patch}
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict(raw)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    assert load_config(p).run_id == "small"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_with_noise(small_cfg):
    c2 = small_cfg.with_noise(0.2, "UNIF")
    assert c2.noise.rho == 0.2 and c2.noise.kind == "UNIF" and small_cfg.noise.rho == 0.5


# --- metrics ------------------------------------------------------------------

def test_confusion_identity_and_rows():
    y = np.array([0, 1, 2, 2, 1])
    ev = confusion_from_predictions(y, y, 3)
    assert ev.accuracy == 1.0
    assert np.array_equal(ev.confusion, np.diag([1, 2, 2]))
    pred = np.array([0, 0, 0, 1, 2])
    ev = confusion_from_predictions(y, pred, 3)
    assert ev.confusion.sum(axis=1).tolist() == [1, 2, 2]
    np.testing.assert_allclose(ev.per_class_accuracy, [1.0, 0.0, 0.0])


def test_constant_classifier_scores_chance():
    clf = Classifier(ClassifierConfig(2, (3,), 4))
    w = clf.init_params(np.random.default_rng(0))
    w = w * 0.0
    split = LabeledSet(np.random.default_rng(1).normal(size=(400, 2)), np.arange(400) % 4)
    ev = evaluate(clf, w, split)
    assert ev.accuracy == pytest.approx(0.25)
    assert ev.confusion[:, 0].sum() == 400  # ties go to class 0


def test_correction_analysis_groups():
    corrected = np.array([[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]])
    heat, stats = correction_analysis(corrected, [0, 0, 1], [0, 1, 1], 2)
    np.testing.assert_allclose(heat, [[0.9, 0.1], [0.45, 0.55]])
    unc, cor = stats
    assert unc["count"] == 2 and cor["count"] == 1
    assert unc["mean_prob_given_label"] == pytest.approx((0.9 + 0.3) / 2)
    assert cor["mean_prob_given_label"] == pytest.approx(0.2)
    assert cor["mean_prob_true_label"] == pytest.approx(0.8)
    assert cor["mean_max_prob"] == pytest.approx(0.8)


# --- runs and exports -----------------------------------------------------------

def test_run_report_contents(small_report):
    r = small_report
    assert r.status == "ok" and r.seed == 1
    assert len(r.history) == 3
    assert r.main_steps == 3 * math.ceil((600 - 150 - 90) / 50)
    heat = np.array(r.heatmap)
    np.testing.assert_allclose(heat.sum(axis=1), 1.0, atol=1e-12)
    assert sum(s["count"] for s in r.correction_stats) == 600 - 150 - 90


def test_export_files(tmp_path, small_report, small_cfg):
    paths = export_report(small_report, tmp_path / "out")
    names = sorted(p.name for p in paths)
    assert names == ["config.json", "correction_stats.csv", "heatmap.csv", "history.csv", "summary.json"]
    header, rows = read_csv(tmp_path / "out" / "history.csv")
    assert header == ["epoch", "noisy_loss", "clean_loss", "test_acc"] and len(rows) == 3
    header, rows = read_csv(tmp_path / "out" / "heatmap.csv")
    assert header == ["true_label", "p0", "p1", "p2"]
    for row in rows:
        assert sum(float(v) for v in row[1:]) == pytest.approx(1.0, abs=1e-12)
    cfg = json.loads((tmp_path / "out" / "config.json").read_text())
    assert ExperimentConfig.from_dict(cfg) == small_cfg
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["final_test_acc"] == small_report.final_test_acc
    assert not list((tmp_path / "out").glob(".*tmp"))


def test_baseline_export_has_no_lcn_files(tmp_path, small_cfg):
    r = run_experiment(small_cfg.with_overrides(method="clean_only"))
    assert r.status == "ok" and r.final_test_acc > 1 / 3 + 0.2
    names = sorted(p.name for p in export_report(r, tmp_path))
    assert "heatmap.csv" not in names and "history.csv" in names


def test_diverged_run_is_marked_failed(small_cfg):
    import dataclasses

    cfg = small_cfg.with_overrides(train=dataclasses.replace(small_cfg.train, main_lr=1e9))
    r = run_experiment(cfg)
    assert r.status == "failed" and "diverged" in r.error


def test_sweep_rows_and_auc(tmp_path, small_cfg):
    import dataclasses

    cfg = small_cfg.with_overrides(train=dataclasses.replace(small_cfg.train, epochs=1))
    rows = run_sweep(cfg, [0.0, 0.5], repeats=2, methods=("noisy_only", "clean_only"))
    assert len(rows) == 4
    assert all(r["n_ok"] == 2 and r["n_failed"] == 0 for r in rows)
    auc = accuracy_auc(rows, "clean_only", 0.0, 0.5)
    assert 0.0 < auc <= 1.0
    header, body = read_csv(export_sweep(rows, tmp_path / "s.csv"))
    assert header[:2] == ["method", "rho"] and len(body) == 4


# --- command line -------------------------------------------------------------

def test_cli_validate_config(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"run_id": "v"}))
    assert cli.main(["validate-config", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["train"]["k"] == 5 and out["noise"]["rho"] == 0.6


def test_cli_error_is_json(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"run_id": "v", "noise": {"kind": "NOPE"}}))
    assert cli.main(["validate-config", str(p)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "NOPE" in err["message"]


def test_cli_run(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**SMALL, "train": {**SMALL["train"], "epochs": 1}}))
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "runs")]) == 0
    agg = json.loads((tmp_path / "runs" / "small" / "aggregate.json").read_text())
    assert agg["repeats"] == 1 and 0 <= agg["mean_acc"] <= 1
    assert (tmp_path / "runs" / "small" / "repeat_0" / "heatmap.csv").exists()


def test_cli_sweep_and_rho_parsing(tmp_path, capsys):
    assert cli._parse_rhos("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli._parse_rhos("0.1,0.3") == [0.1, 0.3]
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**SMALL, "train": {**SMALL["train"], "epochs": 1}}))
    assert cli.main(["sweep", "--config", str(p), "--rho", "0,0.5", "--methods", "noisy_only",
                     "--repeats", "1", "--out", str(tmp_path / "runs")]) == 0
    assert (tmp_path / "runs" / "small" / "sweep.csv").exists()


def test_cli_gradcheck_small(capsys):
    assert cli.main(["gradcheck", "--draws", "3", "--meta-seeds", "2"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3
