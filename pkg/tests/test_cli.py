import csv
import json

import numpy as np
import pytest

from adgcl_lab.cli import ConfigError, load_config, main, parse_overrides

SMALL = [
    "--dataset.n_graphs", "24",
    "--dataset.spec.min_nodes", "6",
    "--dataset.spec.max_nodes", "9",
    "--train.epochs", "1",
    "--train.hidden_dim", "8",
    "--train.num_layers", "2",
    "--train.batch_size", "8",
]


def run(cmd, out, *extra):
    return main([cmd, "--output-dir", str(out), *SMALL, *extra])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfig:
    def test_override_forms(self):
        assert parse_overrides(["--train.tau", "0.5", "--train.mode=nadgcl"]) == [
            ("train.tau", 0.5),
            ("train.mode", "nadgcl"),
        ]

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            load_config(None, [("train.temperature", 0.2)])

    def test_section_cannot_be_replaced(self):
        with pytest.raises(ConfigError):
            load_config(None, [("train", 1)])

    def test_file_and_flags_merge(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"train": {"epochs": 7, "tau": 0.3}}))
        cfg = load_config(str(path), [("train.tau", 2.0)])
        assert cfg["train"]["epochs"] == 7 and cfg["train"]["tau"] == 2.0

    def test_bad_json_exit_code(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert main(["train", "--config", str(path)]) == 2

    def test_missing_value(self, tmp_path):
        assert main(["train", "--output-dir", str(tmp_path), "--train.tau"]) == 2


class TestGenData:
    def test_writes_dataset_and_meta(self, tmp_path, capsys):
        assert run("gen-data", tmp_path) == 0
        meta = json.loads((tmp_path / "dataset.meta.json").read_text())
        assert meta["counts"]["graphs"] == 24
        assert meta["counts"]["per_class"] == {"0": 12, "1": 12}
        assert len((tmp_path / "dataset.jsonl").read_text().splitlines()) == 24
        assert "dataset.jsonl" in capsys.readouterr().out

    def test_byte_identical_rerun(self, tmp_path):
        run("gen-data", tmp_path / "a")
        run("gen-data", tmp_path / "b")
        for name in ("dataset.jsonl", "dataset.meta.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_regression_kind(self, tmp_path):
        assert run("gen-data", tmp_path, "--dataset.kind", "regression") == 0

    def test_invalid_motif(self, tmp_path, capsys):
        code = run("gen-data", tmp_path, "--dataset.spec.class_motifs", '["none", "hexagon"]')
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_file_kind_rejected(self, tmp_path):
        assert run("gen-data", tmp_path, "--dataset.kind", "file") == 2

    def test_env_var_sets_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ADGCL_LAB_OUT", str(tmp_path))
        assert main(["gen-data", "--output-dir", "nested", *SMALL]) == 0
        assert (tmp_path / "nested" / "dataset.jsonl").exists()


class TestTrainEval:
    def test_train_then_eval_and_export(self, tmp_path):
        assert run("train", tmp_path, "--plot", "history.png") == 0
        for name in ("encoder.npz", "head.npz", "augmenter.npz", "history.csv", "config.json", "history.png"):
            assert (tmp_path / name).exists(), name
        assert read_csv(tmp_path / "history.csv")[0] == ["epoch", "nce", "reg", "drop_ratio", "seconds"]

        assert run("eval", tmp_path, "--checkpoint", str(tmp_path)) == 0
        rows = read_csv(tmp_path / "metrics.csv")
        assert rows[0] == ["metric", "split", "value", "l2", "seed", "fold"]
        assert {r[0] for r in rows[1:]} <= {"accuracy", "roc_auc"}

        assert run("export-embeddings", tmp_path, "--checkpoint", str(tmp_path / "encoder.npz")) == 0
        with np.load(tmp_path / "embeddings.npz") as z:
            assert z["embeddings"].shape == (24, 8)
            assert z["labels"].shape == (24,)

    def test_train_without_time_is_reproducible(self, tmp_path):
        for name in ("a", "b"):
            assert run("train", tmp_path / name, "--history_time", "false") == 0
        assert (tmp_path / "a" / "history.csv").read_bytes() == (tmp_path / "b" / "history.csv").read_bytes()
        assert (tmp_path / "a" / "encoder.npz").read_bytes() == (tmp_path / "b" / "encoder.npz").read_bytes()

    def test_baseline_mode_has_no_augmenter(self, tmp_path):
        assert run("train", tmp_path, "--train.mode", "infomax") == 0
        assert not (tmp_path / "augmenter.npz").exists()

    def test_eval_untrained_kfold(self, tmp_path):
        assert run("eval", tmp_path, "--eval.kfold", "true", "--eval.folds", "3") == 0
        folds = {r[5] for r in read_csv(tmp_path / "metrics.csv")[1:]}
        assert folds == {"0", "1", "2"}

    def test_eval_missing_checkpoint(self, tmp_path):
        assert run("eval", tmp_path, "--checkpoint", str(tmp_path / "nope.npz")) == 2

    def test_eval_feature_dim_mismatch(self, tmp_path):
        run("train", tmp_path)
        code = run("eval", tmp_path, "--checkpoint", str(tmp_path), "--dataset.spec.feature_mode", "constant")
        assert code == 2

    def test_logistic_on_regression(self, tmp_path, capsys):
        code = run("eval", tmp_path, "--dataset.kind", "regression", "--eval.probe", "logistic")
        assert code == 2
        assert "regression" in capsys.readouterr().err

    def test_invalid_train_field(self, tmp_path):
        assert run("train", tmp_path, "--train.tau", "0") == 2

    def test_dataset_file(self, tmp_path):
        run("gen-data", tmp_path)
        code = run("eval", tmp_path, "--dataset.kind", "file", "--dataset.path", str(tmp_path / "dataset.jsonl"))
        assert code == 0
        assert run("eval", tmp_path, "--dataset.kind", "file") == 2


class TestSweepCompare:
    def test_sweep_dedups(self, tmp_path, caplog):
        code = run("sweep", tmp_path, "--sweep.lambdas", "[0.5, 0.5, 2.0]", "--plot", "sweep.svg")
        assert code == 0
        rows = read_csv(tmp_path / "sweep.csv")
        assert rows[0] == ["lambda", "final_drop_ratio", "val_metric", "epochs", "seed"]
        assert [r[0] for r in rows[1:]] == ["0.5", "2.0"]
        assert (tmp_path / "sweep.svg").exists()
        assert "duplicate" in caplog.text

    def test_sweep_empty(self, tmp_path):
        assert run("sweep", tmp_path, "--sweep.lambdas", "[]") == 2

    def test_bad_plot_suffix(self, tmp_path):
        assert run("sweep", tmp_path, "--sweep.lambdas", "[1.0]", "--plot", "x.pdf") == 2

    def test_compare(self, tmp_path, capsys):
        code = run("compare", tmp_path, "--compare.methods", '["ru", "nadgcl:0.2"]', "--compare.seeds", "[0, 1]")
        assert code == 0
        for name in ("comparison.csv", "comparison_summary.csv", "comparison.txt", "comparison.meta.json"):
            assert (tmp_path / name).exists(), name
        summary = read_csv(tmp_path / "comparison_summary.csv")
        assert summary[0] == ["method", "metric", "mean", "std", "seeds", "rank"]
        assert {r[0] for r in summary[1:]} == {"ru", "nadgcl:0.2"}
        assert "ru" in capsys.readouterr().out

    def test_compare_unknown_method(self, tmp_path):
        assert run("compare", tmp_path, "--compare.methods", '["gan"]') == 2
