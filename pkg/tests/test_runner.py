"""Pipeline orchestration: stages, comparison, learning curve, CLI."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from slidebench.categories import Category, Subset
from slidebench.config import BackendConfig, ConfigError, RunConfig, load_config
from slidebench.fixture import paper_manifest
from slidebench.learners import ClassifierSpec
from slidebench.manifest import write_manifest
from slidebench.runner import (
    StageError,
    compare_models,
    ingest_stage,
    learning_curve,
    run_pipeline,
)

SMALL_COUNTS = {
    Category.BASALOID: 20,
    Category.MELANOCYTIC: 30,
    Category.SQUAMOUS: 40,
    Category.OTHER: 10,
}
SMALL_SUBSETS = {Subset.TRAIN: 63, Subset.VALIDATION: 13, Subset.TEST: 14}

FAST_GRIDS = {
    "logistic_regression": {"l2": [1e-2], "max_iter": [300]},
    "knn": {"k": [3]},
    "decision_tree": {"max_depth": [4]},
    "random_forest": {"n_estimators": [10]},
    "gradient_boosting": {"n_estimators": [10], "learning_rate": [0.1]},
    "adaboost": {"n_estimators": [10]},
}


def small_config(tmp_path: Path, seps=(1.2, 1.2), dims=(16, 16), seed=7, **overrides) -> RunConfig:
    tmp_path.mkdir(parents=True, exist_ok=True)
    manifest_path = tmp_path / "manifest.csv"
    if not manifest_path.exists():
        write_manifest(
            paper_manifest(seed=5, category_counts=SMALL_COUNTS, subset_counts=SMALL_SUBSETS),
            manifest_path,
        )
    backends = [
        BackendConfig(
            name=f"bk{i}", kind="synthetic", dim=dims[i],
            class_separation=seps[i], patch_count_min=4, patch_count_max=8,
        )
        for i in range(len(seps))
    ]
    kwargs = dict(
        manifest=str(manifest_path),
        out_dir=str(tmp_path / "out"),
        cache_dir=str(tmp_path / "cache"),
        seed=seed,
        backends=backends,
        grids=FAST_GRIDS,
        learning_curve_repeats=2,
    )
    kwargs.update(overrides)
    return RunConfig(**kwargs)


@pytest.fixture(scope="module")
def completed_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = small_config(tmp)
    out = run_pipeline(cfg)
    return cfg, out


class TestRunPipeline:
    def test_outputs_exist(self, completed_run):
        cfg, out = completed_run
        assert (out / "accuracy_table.json").exists()
        assert (out / "f1_table.json").exists()
        assert (out / "comparison.json").exists()
        assert (out / "events.jsonl").exists()
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["status"] == "complete"
        for backend in ("bk0", "bk1"):
            assert (out / backend / "design.dmat").exists()
            for kind in cfg.classifiers:
                assert (out / backend / "models" / f"{kind}.modl").exists()
                assert (out / backend / "reports" / f"{kind}.json").exists()
                assert (out / backend / "predictions" / f"{kind}.json").exists()
                assert (out / backend / "plots" / f"{kind}_roc.svg").exists()
                assert (out / backend / "plots" / f"{kind}_pr.svg").exists()

    def test_accuracy_table_shape(self, completed_run):
        _, out = completed_run
        table = json.loads((out / "accuracy_table.json").read_text())
        assert table["metric"] == "accuracy"
        assert table["backends"] == ["bk0", "bk1"]
        assert len(table["rows"]) == 7
        kinds = [row["kind"] for row in table["rows"]]
        assert len(set(kinds)) == 7
        for row in table["rows"]:
            assert set(row["accuracy"]) == {"bk0", "bk1"}
            for v in row["accuracy"].values():
                assert 0.0 <= v <= 1.0

    def test_f1_table_shape(self, completed_run):
        _, out = completed_run
        table = json.loads((out / "f1_table.json").read_text())
        assert len(table["rows"]) == 21  # 7 classifiers x 3 categories
        categories = {row["category"] for row in table["rows"]}
        assert categories == {"basaloid", "melanocytic", "squamous"}

    def test_comparison_table4_shape(self, completed_run):
        _, out = completed_run
        doc = json.loads((out / "comparison.json").read_text())
        assert [c["category"] for c in doc["categories"]] == ["basaloid", "melanocytic", "squamous"]
        for cat in doc["categories"]:
            assert set(cat["delong"]) == {"auc_a", "auc_b", "z", "p"}
            assert set(cat["venkatraman"]) == {"roc_difference", "p", "permutations"}
            assert 0.0 <= cat["delong"]["p"] <= 1.0
        tt = doc["paired_ttest"]
        assert tt["df"] == 6
        assert tt["n_pairs"] == 7

    def test_events_logged(self, completed_run):
        _, out = completed_run
        lines = (out / "events.jsonl").read_text().splitlines()
        assert len(lines) > 10
        events = [json.loads(l) for l in lines]
        phases = {e["phase"] for e in events}
        assert {"ingest", "extract", "aggregate", "train", "evaluate"} <= phases

    def test_missing_manifest_fails_before_compute(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg.manifest = str(tmp_path / "absent.csv")
        with pytest.raises(StageError, match=r"\[ingest\]"):
            run_pipeline(cfg)
        meta = json.loads((Path(cfg.out_dir) / "run_meta.json").read_text())
        assert meta["status"] == "failed"
        assert meta["stage"] == "ingest"
        assert not (Path(cfg.out_dir) / "accuracy_table.json").exists()


class TestDeterminism:
    def test_two_runs_byte_identical(self, tmp_path):
        cfg1 = small_config(tmp_path / "a")
        cfg2 = small_config(tmp_path / "b")
        out1 = run_pipeline(cfg1)
        out2 = run_pipeline(cfg2)
        for rel in ["accuracy_table.json", "f1_table.json", "comparison.json"]:
            b1 = (out1 / rel).read_bytes()
            b2 = (out2 / rel).read_bytes()
            assert b1 == b2, f"{rel} differs between identical runs"
        for backend in ("bk0", "bk1"):
            for kind in cfg1.classifiers:
                r1 = (out1 / backend / "reports" / f"{kind}.json").read_bytes()
                r2 = (out2 / backend / "reports" / f"{kind}.json").read_bytes()
                assert r1 == r2


class TestCompareModels:
    def test_self_comparison_null(self, completed_run):
        cfg, out = completed_run
        doc = compare_models(
            out / "bk0", out / "bk0", cfg.selected_classifier, cfg.classifiers,
            permutations=200, seed=1,
        )
        for cat in doc["categories"]:
            assert cat["delong"]["z"] == 0.0
            assert cat["delong"]["p"] == 1.0
            assert cat["venkatraman"]["roc_difference"] == 0.0
            assert cat["venkatraman"]["p"] == 1.0
        assert doc["paired_ttest"]["t"] == 0.0
        assert doc["paired_ttest"]["p"] == 1.0

    def test_stronger_backend_wins(self, tmp_path):
        # Backend 0 has much stronger class separation than backend 1.
        cfg = small_config(tmp_path, seps=(1.2, 0.15), seed=19)
        out = run_pipeline(cfg)
        doc = json.loads((out / "comparison.json").read_text())
        for cat in doc["categories"]:
            assert cat["delong"]["auc_a"] > cat["delong"]["auc_b"]
            assert cat["delong"]["z"] > 0

    def test_unpaired_test_sets_rejected(self, tmp_path, completed_run):
        cfg, out = completed_run
        mangled = tmp_path / "mangled"
        (mangled / "predictions").mkdir(parents=True)
        (mangled / "reports").mkdir(parents=True)
        pred = json.loads(
            (out / "bk0" / "predictions" / f"{cfg.selected_classifier}.json").read_text()
        )
        pred["slide_ids"] = list(reversed(pred["slide_ids"]))
        (mangled / "predictions" / f"{cfg.selected_classifier}.json").write_text(json.dumps(pred))
        with pytest.raises(ValueError, match="unpaired test sets"):
            compare_models(out / "bk0", mangled, cfg.selected_classifier, cfg.classifiers)


class TestLearningCurve:
    def test_full_size_matches_pipeline_accuracy(self, completed_run):
        cfg, out = completed_run
        cv = json.loads((out / "bk0" / "cv" / "logistic_regression.json").read_text())
        spec = ClassifierSpec("logistic_regression", params=cv["best"]["params"], seed=cv["best"]["seed"])
        curve = learning_curve(cfg, "bk0", spec, sizes=[63])
        report = json.loads((out / "bk0" / "reports" / "logistic_regression.json").read_text())
        assert curve.sizes[-1] == 63
        assert curve.test_accuracy[-1] == pytest.approx(report["accuracy"], abs=1e-12)

    def test_unsorted_sizes_rejected(self, completed_run):
        cfg, _ = completed_run
        spec = ClassifierSpec("naive_bayes")
        with pytest.raises(ValueError, match="strictly increasing"):
            learning_curve(cfg, "bk0", spec, sizes=[40, 20])

    def test_size_exceeding_training_rejected(self, completed_run):
        cfg, _ = completed_run
        spec = ClassifierSpec("naive_bayes")
        with pytest.raises(ValueError, match="exceeds the training count"):
            learning_curve(cfg, "bk0", spec, sizes=[64])

    def test_sizes_below_class_count_rejected(self, completed_run):
        cfg, _ = completed_run
        spec = ClassifierSpec("naive_bayes")
        with pytest.raises(ValueError, match="class count"):
            learning_curve(cfg, "bk0", spec, sizes=[2, 63])

    def test_curve_arrays_aligned(self, completed_run):
        cfg, _ = completed_run
        spec = ClassifierSpec("naive_bayes")
        curve = learning_curve(cfg, "bk0", spec, sizes=[10, 30], repeats=2)
        # Full training size is appended automatically.
        assert curve.sizes == [10, 30, 63]
        assert len(curve.train_accuracy) == len(curve.test_accuracy) == 3


class TestParallelPath:
    def test_jobs_two_matches_serial(self, tmp_path):
        cfg_serial = small_config(tmp_path / "s", seed=23)
        cfg_par = small_config(tmp_path / "p", seed=23, jobs=2)
        out_s = run_pipeline(cfg_serial)
        out_p = run_pipeline(cfg_par)
        a = json.loads((out_s / "accuracy_table.json").read_text())
        b = json.loads((out_p / "accuracy_table.json").read_text())
        assert a == b


class TestConfig:
    def test_load_with_overrides(self, tmp_path):
        cfg = small_config(tmp_path)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = load_config(path, {"seed": 99})
        assert loaded.seed == 99
        assert loaded.backends[0].name == "bk0"

    def test_missing_required_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"manifest": "x", "backends": []}))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        cfg = small_config(tmp_path)
        raw = cfg.to_dict()
        raw["tipo"] = 1
        path = tmp_path / "c.json"
        path.write_text(json.dumps(raw))
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(path)

    def test_duplicate_backend_names(self, tmp_path):
        with pytest.raises(ConfigError, match="unique"):
            small_config(tmp_path, seps=(1.0, 1.0)).backends[0]
            RunConfig(
                manifest="m", out_dir="o", cache_dir="c", seed=1,
                backends=[
                    BackendConfig(name="x", kind="synthetic", dim=8),
                    BackendConfig(name="x", kind="synthetic", dim=8),
                ],
            )

    def test_decreasing_curve_sizes_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="strictly increasing"):
            small_config(tmp_path, learning_curve_sizes=[50, 20])


class TestCli:
    def run_cli(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "slidebench.cli", *args],
            capture_output=True, text=True,
        )

    def test_fixture_and_ingest(self, tmp_path):
        manifest = tmp_path / "m.csv"
        res = self.run_cli("fixture", "--out", str(manifest), "--seed", "0")
        assert res.returncode == 0, res.stderr
        res = self.run_cli("ingest", "--manifest", str(manifest))
        assert res.returncode == 0
        assert "classified: 714" in res.stdout
        assert "train=498 test=216" in res.stdout

    def test_run_subcommand_and_exit_codes(self, tmp_path):
        cfg = small_config(tmp_path, seps=(1.2,), dims=(16,))
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        res = self.run_cli("run", "--config", str(path))
        assert res.returncode == 0, res.stderr
        assert (Path(cfg.out_dir) / "accuracy_table.json").exists()
        # comparison.json requires two backends; single-backend run skips it
        assert not (Path(cfg.out_dir) / "comparison.json").exists()

    def test_missing_config_fails(self):
        res = self.run_cli("run", "--config", "/nonexistent/config.json")
        assert res.returncode == 2
        assert "config" in res.stderr

    def test_stage_tagged_error(self, tmp_path):
        cfg = small_config(tmp_path, seps=(1.2,), dims=(16,))
        cfg.manifest = str(tmp_path / "gone.csv")
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        res = self.run_cli("run", "--config", str(path))
        assert res.returncode == 2
        assert "[ingest]" in res.stderr

    def test_learning_curve_subcommand(self, tmp_path):
        cfg = small_config(tmp_path, seps=(1.2,), dims=(16,))
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert self.run_cli("run", "--config", str(path)).returncode == 0
        res = self.run_cli(
            "learning-curve", "--config", str(path),
            "--classifier", "naive_bayes", "--sizes", "20,40", "--repeats", "1",
        )
        assert res.returncode == 0, res.stderr
        curve_path = Path(cfg.out_dir) / "bk0" / "curves" / "naive_bayes.json"
        assert curve_path.exists()
        assert (Path(cfg.out_dir) / "bk0" / "curves" / "naive_bayes_learning_curve.svg").exists()

    def test_stagewise_flow(self, tmp_path):
        # extract -> aggregate -> train -> compare -> plot, one stage at a time.
        cfg = small_config(tmp_path)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        out = Path(cfg.out_dir)

        res = self.run_cli("extract", "--config", str(path))
        assert res.returncode == 0, res.stderr
        assert len(list((Path(cfg.cache_dir) / "bk0").glob("*.embc"))) == 90

        res = self.run_cli("aggregate", "--config", str(path))
        assert res.returncode == 0, res.stderr
        assert (out / "bk0" / "design.dmat").exists()
        assert "design matrix [90, 16]" in res.stdout

        res = self.run_cli("train", "--config", str(path))
        assert res.returncode == 0, res.stderr
        assert (out / "bk0" / "models" / "knn.modl").exists()
        assert (out / "accuracy_table.json").exists()

        res = self.run_cli("compare", "--config", str(path))
        assert res.returncode == 0, res.stderr
        assert (out / "comparison.json").exists()

        res = self.run_cli("plot", "--config", str(path))
        assert res.returncode == 0, res.stderr
        assert (out / "bk0" / "plots" / "logistic_regression_roc.svg").exists()
