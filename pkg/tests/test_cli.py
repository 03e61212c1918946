import hashlib
import json
import os
import subprocess
import sys

import pytest

from ghic.cli import run
from ghic.corpus import read_dataset, read_dump, write_dump
from ghic.labels import LABELS
from ghic.synthetic import separable_corpus

SMALL_NEURAL = ["--epochs", "2", "--hidden", "8", "--embedding", "8", "--batch-size", "32"]


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def tree_digest(directory):
    return {name: sha(os.path.join(directory, name)) for name in sorted(os.listdir(directory))}


@pytest.fixture
def synth_dataset(tmp_path):
    dump_dir = tmp_path / "dumps"
    dump_dir.mkdir()
    write_dump(separable_corpus(12, seed=3), dump_dir / "synthetic.jsonl")
    out = tmp_path / "dataset.jsonl"
    assert run(["prepare", "--in", str(dump_dir), "--out", str(out)]) == 0
    return out


class TestPrepare:
    def test_fixture_directory(self, tmp_path, data_dir):
        out = tmp_path / "prep" / "dataset.jsonl"
        assert run(["prepare", "--in", data_dir, "--out", str(out)]) == 0
        examples = read_dataset(out)
        # 9 cleaned records; octo/app#7 carries only a non-default label
        assert len(examples) == 8
        hist = (tmp_path / "prep" / "dataset.histogram.csv").read_text().splitlines()
        assert hist[0] == "label,count"
        assert len(hist) == 11 and hist[-1] == "total,8"
        cfg = json.loads((tmp_path / "prep" / "dataset.run_config.json").read_text())
        assert cfg["command"] == "prepare" and cfg["examples"] == 8
        assert len(cfg["sources"]) == 2

    def test_single_file(self, tmp_path, dump_a):
        out = tmp_path / "d.jsonl"
        assert run(["prepare", "--in", dump_a, "--out", str(out)]) == 0
        assert len(read_dataset(out)) == 6

    def test_does_not_mutate_inputs(self, tmp_path, data_dir):
        before = tree_digest(data_dir)
        run(["prepare", "--in", data_dir, "--out", str(tmp_path / "x.jsonl")])
        assert tree_digest(data_dir) == before


class TestTrain:
    def test_nb_title_row_semantics(self, tmp_path, synth_dataset, capsys):
        model = tmp_path / "nb.ghic"
        assert run(["train", "--data", str(synth_dataset), "--model", "nb", "--field", "title",
                    "--split", "0.8", "--seed", "1", "--out", str(model)]) == 0
        report_dir = tmp_path / "nb_report"
        report = json.loads((report_dir / "report.json").read_text())
        assert report["model"] == "Naive Bayes (using title)"
        assert "Naive Bayes (using title): accuracy" in capsys.readouterr().out
        assert not (report_dir / "loss_curve.csv").exists()
        cfg = json.loads((report_dir / "run_config.json").read_text())
        assert cfg["resolved_field"] == "title" and cfg["seed"] == 1 and cfg["model"] == "nb"
        assert cfg["test_size"] == 9 * 12 - cfg["train_size"]

    def test_neural_defaults_resolved(self, tmp_path, synth_dataset):
        model = tmp_path / "g.ghic"
        assert run(["train", "--data", str(synth_dataset), "--model", "gru", "--out", str(model), *SMALL_NEURAL]) == 0
        cfg = json.loads((tmp_path / "g_report" / "run_config.json").read_text())
        assert cfg["resolved_field"] == "both" and cfg["resolved_split"] == 0.7
        lines = (tmp_path / "g_report" / "loss_curve.csv").read_text().splitlines()
        assert lines[0] == "epoch,loss" and len(lines) == 3

    def test_gru_seed7_deterministic(self, tmp_path, synth_dataset):
        outs = []
        for run_name in ("a", "b"):
            model = tmp_path / run_name / "gru.ghic"
            rdir = tmp_path / run_name / "report"
            assert run(["train", "--data", str(synth_dataset), "--model", "gru", "--seed", "7",
                        "--class-weights", "--out", str(model), "--report-dir", str(rdir), *SMALL_NEURAL]) == 0
            digest = tree_digest(rdir)
            cfg = json.loads((rdir / "run_config.json").read_text())
            outs.append((sha(model), {k: v for k, v in digest.items() if k != "run_config.json"}, cfg["seed"]))
        assert outs[0] == outs[1]

    def test_rf_with_few_trees(self, tmp_path, synth_dataset):
        model = tmp_path / "rf.ghic"
        assert run(["train", "--data", str(synth_dataset), "--model", "rf", "--trees", "5", "--out", str(model)]) == 0
        report = json.loads((tmp_path / "rf_report" / "report.json").read_text())
        assert report["model"] == "Random Forest (using body)"


class TestEvaluatePredict:
    @pytest.fixture
    def nb_model(self, tmp_path, synth_dataset):
        model = tmp_path / "nb.ghic"
        assert run(["train", "--data", str(synth_dataset), "--model", "nb", "--out", str(model)]) == 0
        return model

    def test_evaluate_held_out_matches_train_report(self, tmp_path, nb_model, synth_dataset):
        out = tmp_path / "eval"
        assert run(["evaluate", "--model", str(nb_model), "--data", str(synth_dataset), "--out", str(out)]) == 0
        assert (out / "report.json").read_bytes() == (tmp_path / "nb_report" / "report.json").read_bytes()
        assert json.loads((out / "run_config.json").read_text())["subset"] == "test"

    def test_evaluate_all(self, tmp_path, nb_model, synth_dataset):
        out = tmp_path / "eval_all"
        assert run(["evaluate", "--model", str(nb_model), "--data", str(synth_dataset),
                    "--out", str(out), "--subset", "all"]) == 0
        assert json.loads((out / "report.json").read_text())["support_total"] == 9 * 12

    def test_predict(self, tmp_path, nb_model):
        issues = tmp_path / "issues.jsonl"
        write_dump(separable_corpus(2, seed=3), issues)
        out = tmp_path / "labeled.jsonl"
        assert run(["predict", "--model", str(nb_model), "--in", str(issues), "--out", str(out)]) == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 18
        for row in rows:
            assert row["predicted_label"] in LABELS
            assert list(row["scores"]) == list(LABELS)
            assert sum(row["scores"].values()) == pytest.approx(1.0)
        assert (tmp_path / "labeled.run_config.json").exists()

    def test_predict_empty(self, tmp_path, nb_model):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        out = tmp_path / "out.jsonl"
        assert run(["predict", "--model", str(nb_model), "--in", str(empty), "--out", str(out)]) == 0
        assert out.read_text() == ""


class TestFetch:
    def test_fetch_writes_dumps_and_config(self, tmp_path, server):
        repos = tmp_path / "repos.txt"
        repos.write_text("# top repos\nocto/paged\nocto/mixed\n")
        out = tmp_path / "raw"
        assert run(["fetch", "--repos", str(repos), "--out", str(out), "--token", "s3cret",
                    "--base-url", server.base]) == 0
        assert len(read_dump(out / "octo__paged.jsonl")) == 137
        assert len(read_dump(out / "octo__mixed.jsonl")) == 2
        cfg_text = (out / "run_config.json").read_text()
        assert "s3cret" not in cfg_text
        assert json.loads(cfg_text)["repos_list"] == ["octo/paged", "octo/mixed"]

    def test_fetch_error_exit_1(self, tmp_path, server, capsys):
        repos = tmp_path / "repos.txt"
        repos.write_text("octo/missing\n")
        assert run(["fetch", "--repos", str(repos), "--out", str(tmp_path / "o"), "--base-url", server.base]) == 1
        assert "RepoNotFoundError: repository not found: octo/missing" in capsys.readouterr().err


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as info:
            run(["frobnicate"])
        assert info.value.code == 2
        assert "usage:" in capsys.readouterr().err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as info:
            run(["prepare", "--in", "x", "--out", "y", "--bogus"])
        assert info.value.code == 2

    def test_bad_model_choice(self):
        with pytest.raises(SystemExit) as info:
            run(["train", "--data", "d", "--model", "svm", "--out", "m"])
        assert info.value.code == 2

    def test_pipeline_error_exit_1_verbatim(self, tmp_path, capsys):
        assert run(["evaluate", "--model", str(tmp_path / "nope.ghic"), "--data", "d", "--out", "o"]) == 1
        assert "No such file or directory" in capsys.readouterr().err

    def test_corrupt_bundle_message(self, tmp_path, capsys):
        bad = tmp_path / "bad.ghic"
        bad.write_bytes(b"NOPE")
        assert run(["predict", "--model", str(bad), "--in", "x", "--out", "y"]) == 1
        assert "BadMagicError" in capsys.readouterr().err

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "ghic", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("ghic ")
        proc = subprocess.run([sys.executable, "-m", "ghic", "nope"], capture_output=True, text=True)
        assert proc.returncode == 2


def test_synth_command(tmp_path):
    assert run(["synth", "--out", str(tmp_path / "s"), "--per-class", "20", "--skew", "4", "--seed", "2"]) == 0
    records = read_dump(tmp_path / "s" / "synthetic.jsonl")
    assert len(records) == sum([20, 17, 14, 12, 10, 8, 7, 6, 5])
