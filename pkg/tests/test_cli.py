import json
import shutil

import pandas as pd
import pytest

from cityswb import pipeline
from cityswb.cli import main
from cityswb.synthetic import generate


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def small(tmp_path):
    generate(tmp_path, seed=1)
    return tmp_path


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("ingest", "wellbeing", "forecast", "label", "features", "train", "correlate",
                "report"):
        assert cmd in out


def test_wellbeing_writes_one_csv_per_community(small, capsys):
    cfg = str(small / "config.json")
    assert main(["ingest", "--config", cfg]) == 0
    assert main(["wellbeing", "--config", cfg]) == 0
    out = small / "run" / "wellbeing"
    assert sorted(p.name for p in out.glob("*.csv")) == ["city00.csv", "city01.csv", "city02.csv"]
    frame = pd.read_csv(out / "city00.csv")
    assert list(frame.columns) == ["date", "posemo_raw", "negemo_raw", "wellbeing"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"city00.csv", "city01.csv", "city02.csv"}
    assert "lexicon.csv" in manifest["inputs"]


def test_stage_rerun_is_idempotent(small):
    cfg = str(small / "config.json")
    for stage in ("ingest", "wellbeing", "forecast", "label"):
        assert main([stage, "--config", cfg]) == 0
    first = _files(small / "run")
    assert main(["wellbeing", "--config", cfg]) == 0
    assert main(["forecast", "--config", cfg]) == 0
    assert main(["label", "--config", cfg]) == 0
    assert _files(small / "run") == first


def test_missing_lexicon_exit_code_names_path(small, capsys):
    cfg = json.loads((small / "config.json").read_text())
    cfg["paths"]["lexicon"] = "no_such_lexicon.csv"
    (small / "bad.json").write_text(json.dumps(cfg))
    assert main(["ingest", "--config", str(small / "bad.json")]) == 0
    assert main(["wellbeing", "--config", str(small / "bad.json")]) == 1
    assert "no_such_lexicon.csv" in capsys.readouterr().err


def test_missing_upstream_names_stage(small, capsys):
    assert main(["forecast", "--config", str(small / "config.json")]) == 1
    assert "wellbeing" in capsys.readouterr().err


def test_missing_config_is_input_error(tmp_path, capsys):
    assert main(["ingest", "--config", str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err


def test_numerical_failure_exit_code(small, capsys):
    cfg = json.loads((small / "config.json").read_text())
    cfg["forecaster"] = {"tau": 1e6, "max_iter": 1}
    (small / "strict.json").write_text(json.dumps(cfg))
    conf = str(small / "strict.json")
    assert main(["ingest", "--config", conf]) == 0
    assert main(["wellbeing", "--config", conf]) == 0
    assert main(["forecast", "--config", conf]) == 2
    assert "converge" in capsys.readouterr().err


def test_out_and_seed_overrides(small, tmp_path_factory):
    other = tmp_path_factory.mktemp("elsewhere")
    assert main(["ingest", "--config", str(small / "config.json"), "--out", str(other),
                 "--seed", "5", "--jobs", "1"]) == 0
    assert (other / "ingest" / "summary.json").exists()
    assert not (small / "run").exists()


def test_label_plots(synthetic_run):
    plots = synthetic_run.out / "label" / "plots"
    svgs = sorted(plots.glob("*.svg"))
    assert len(svgs) == 6
    text = svgs[0].read_text()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    for cls in ('class="band"', 'class="forecast"', 'class="observed"', 'class="marker"'):
        assert cls in text


def test_labels_match_script(synthetic_run):
    labels = pd.read_csv(synthetic_run.out / "label" / "labels.csv")
    expected = pd.read_csv(synthetic_run.base_dir / "expected_labels.csv")
    assert labels["label"].tolist() == expected["label"].tolist()


def test_train_metrics_schema(synthetic_run, capsys):
    cfg = str(synthetic_run.base_dir / "config.json")
    assert main(["train", "--config", cfg, "--task", "impact", "--feature-set", "all"]) == 0
    out = synthetic_run.out / "train" / "impact" / "all"
    metrics = pd.read_csv(out / "metrics.csv", index_col=0)
    assert list(metrics.columns) == ["Acc", "P", "R", "F1", "AUC"]
    coef = pd.read_csv(out / "coefficients.csv")
    assert coef["coef"].is_monotonic_decreasing
    folds = json.loads((out / "folds.json").read_text())
    assert len(folds) == 6


def test_train_recovery_uses_affected_only(synthetic_run):
    cfg = str(synthetic_run.base_dir / "config.json")
    assert main(["train", "--config", cfg, "--task", "recovery",
                 "--feature-set", "all-selected"]) == 0
    folds = json.loads((synthetic_run.out / "train" / "recovery" / "all-selected" /
                        "folds.json").read_text())
    labels = pd.read_csv(synthetic_run.out / "label" / "labels.csv").set_index("community")
    rows = [f["row"] for f in folds]
    assert len(rows) == 4
    assert "Unaffected" not in set(labels.loc[rows, "label"])


def test_train_rejects_unknown_feature_set(synthetic_run):
    with pytest.raises(SystemExit) as info:
        main(["train", "--config", str(synthetic_run.base_dir / "config.json"),
              "--feature-set", "everything"])
    assert info.value.code == 2


def test_correlate_and_report(synthetic_run):
    table = pd.read_csv(synthetic_run.out / "correlate" / "bric_correlation.csv")
    assert len(table) == 7 and set(table.columns) == {"domain", "rho", "p_value", "n"}
    report = synthetic_run.out / "report"
    counts = pd.read_csv(report / "recovery_counts.csv")
    assert counts["communities"].tolist() == [2, 2, 2]
    results = pd.read_csv(report / "impact_results.csv", index_col=0)
    assert {"Acc", "P", "R", "F1", "AUC", "p_vs_demographics"} <= set(results.columns)
    assert "all" in results.index
    assert (report / "report.md").read_text().startswith("# Run report")


def test_features_stage_outputs(synthetic_run):
    fm = pipeline.read_features(synthetic_run)
    assert set(fm.groups) == {"demographics", "covid", "user_interaction", "post_interaction",
                              "pragmatic", "liwc"}
    assert len(fm.groups["user_interaction"]) == 9 and len(fm.groups["post_interaction"]) == 5
    assert len(fm.groups["liwc"]) == 11
    assert not fm.X.isna().any().any()
    cols = json.loads((synthetic_run.out / "features" / "columns.json").read_text())
    assert [c["column"] for c in cols] == list(fm.X.columns)


def test_manifest_is_reproducible_recipe(synthetic_run):
    m = json.loads((synthetic_run.out / "forecast" / "manifest.json").read_text())
    assert m["config"]["seed"] == 0
    assert m["config"]["forecaster"]["n_samples"] == 1000
    for name, digest in m["outputs"].items():
        assert pipeline.sha256(synthetic_run.out / "forecast" / name) == digest
    assert any(k.startswith("out/wellbeing/") for k in m["inputs"])
    for name, digest in m["inputs"].items():
        if name.startswith("out/"):
            path = synthetic_run.out / name[len("out/"):]
        else:
            path = synthetic_run.base_dir / name
        assert pipeline.sha256(path) == digest


def test_synth_subcommand(tmp_path):
    assert main(["synth", str(tmp_path / "s"), "--patterns", "Recovered", "--seed", "2"]) == 0
    cfg = json.loads((tmp_path / "s" / "config.json").read_text())
    assert cfg["seed"] == 2
    assert pd.read_csv(tmp_path / "s" / "expected_labels.csv")["label"].tolist() == ["Recovered"]
