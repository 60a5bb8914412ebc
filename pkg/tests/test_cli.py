import json
from pathlib import Path

import pytest

from csfbench.cli import main

SAMPLE_CSV = str(Path(__file__).resolve().parent.parent / "data" / "sample_prices.csv")


def run_cli(*argv):
    return main(list(argv))


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli("generate", "--family", "csf", "--frobnicate") == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand(self, capsys):
        assert run_cli("explode") == 1

    def test_missing_config_is_runtime_error(self, tmp_path, capsys):
        code = run_cli("run", "--config", str(tmp_path / "missing.json"),
                       "--out-dir", str(tmp_path / "out"))
        assert code == 2
        assert "not found" in capsys.readouterr().err

    def test_bad_dataset_is_runtime_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"schema": "csfbench-v9"}\n')
        code = run_cli("train", "--dataset", str(bad), "--model", "nb",
                       "--out-dir", str(tmp_path / "out"))
        assert code == 2


class TestGenerate:
    def test_csf_writes_dataset_and_rule(self, tmp_path):
        out = tmp_path / "runs" / "a"
        code = run_cli("--quiet", "generate", "--family", "csf", "--n", "500",
                       "--seed", "42", "--out-dir", str(out))
        assert code == 0
        assert (out / "dataset.jsonl").exists()
        rule = json.loads((out / "rule.json").read_text())
        assert rule["schema"] == "csfrule-v1"
        assert rule["threshold"] is not None

    def test_random_family(self, tmp_path):
        out = tmp_path / "r"
        assert run_cli("--quiet", "generate", "--family", "random", "--n", "300",
                       "--seed", "1", "--out-dir", str(out)) == 0
        assert (out / "dataset.jsonl").exists()
        assert not (out / "rule.json").exists()


class TestPipeline:
    def test_generate_train_evaluate(self, tmp_path):
        gen_dir = tmp_path / "gen"
        assert run_cli("--quiet", "generate", "--family", "random", "--n", "600",
                       "--seed", "3", "--out-dir", str(gen_dir)) == 0
        train_dir = tmp_path / "train"
        for model in ("nb", "svm", "sm-csf"):
            assert run_cli("--quiet", "train", "--dataset", str(gen_dir / "dataset.jsonl"),
                           "--model", model, "--out-dir", str(train_dir)) == 0
            assert (train_dir / f"model-{model}.json").exists()

    def test_run_and_evaluate_predictions(self, tmp_path):
        config = {
            "schema": "runconfig-v1",
            "families": ["csf"],
            "models": ["nb"],
            "n_windows": 1500,
            "seed": 5,
            "baseline_trials": 20,
            "calibration_n": 2000,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        out = tmp_path / "out"
        assert run_cli("--quiet", "run", "--config", str(cfg_path),
                       "--out-dir", str(out)) == 0
        assert (out / "reports.json").exists()
        assert (out / "reports.csv").exists()
        assert (out / "plot_precision.csv").exists()
        assert (out / "csf" / "split.json").exists()

        # the written oracle predictions re-evaluate cleanly... but against the
        # test split only, so score the nb prediction file instead
        eval_out = tmp_path / "eval"
        code = run_cli("--quiet", "evaluate",
                       "--dataset", str(out / "csf" / "dataset.jsonl"),
                       "--predictions", str(out / "csf" / "predictions" / "nb.jsonl"),
                       "--out-dir", str(eval_out))
        assert code == 0
        report = json.loads((eval_out / "report.json").read_text())[0]
        assert report["model"] == "nb"
        assert 0.0 <= report["precision_pos"] <= 1.0

    def test_run_determinism(self, tmp_path):
        config = {
            "schema": "runconfig-v1",
            "families": ["random"],
            "models": ["nb"],
            "n_windows": 400,
            "seed": 9,
            "baseline_trials": 10,
        }
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps(config))
        assert run_cli("--quiet", "run", "--config", str(cfg_path),
                       "--out-dir", str(tmp_path / "a")) == 0
        assert run_cli("--quiet", "run", "--config", str(cfg_path),
                       "--out-dir", str(tmp_path / "b")) == 0
        for rel in ("reports.json", "random/dataset.jsonl"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        config = {
            "schema": "runconfig-v1",
            "families": ["random"],
            "models": [],
            "n_windows": 300,
            "seed": 1,
            "baseline_trials": 5,
        }
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps(config))
        run_cli("--quiet", "run", "--config", str(cfg_path), "--out-dir", str(tmp_path / "a"))
        run_cli("--quiet", "run", "--config", str(cfg_path), "--seed", "2",
                "--out-dir", str(tmp_path / "b"))
        a = (tmp_path / "a" / "random" / "dataset.jsonl").read_bytes()
        b = (tmp_path / "b" / "random" / "dataset.jsonl").read_bytes()
        assert a != b


class TestIngestAndAcf:
    def test_ingest_sample(self, tmp_path, capsys):
        out = tmp_path / "real"
        assert run_cli("ingest", "--csv", SAMPLE_CSV, "--out-dir", str(out)) == 0
        assert (out / "dataset.jsonl").exists()
        assert "windows" in capsys.readouterr().err

    def test_acf(self, tmp_path):
        out = tmp_path / "acf"
        assert run_cli("--quiet", "acf", "--csv", SAMPLE_CSV, "--max-lag", "10",
                       "--out-dir", str(out)) == 0
        lines = (out / "acf.csv").read_text().strip().splitlines()
        assert lines[0] == "lag,acf"
        assert len(lines) == 12
        assert float(lines[1].split(",")[1]) == 1.0
