"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a one-line verdict; ``conftest.py`` prints the nine lines
as a PASS/FAIL block at the end of the session.
"""

import hashlib
import json
import math
import os
import random
import time

import numpy as np
import pytest

from acceptance_log import record
from ghic import porter
from ghic.cli import run
from ghic.corpus import write_dump
from ghic.evaluation import metrics, micro_f1, stratified_split
from ghic.forest import best_split
from ghic.naive_bayes import nb_scores, nb_train
from ghic.recurrent import KINDS, TrainingConfig, batch_loss, forward_batch, init_model
from ghic.synthetic import separable_corpus, skewed_counts
from oracles import brute_force_nb_scores, exhaustive_best_split, gradient_check

DATA = os.path.join(os.path.dirname(__file__), "data")
MODELS = ("nb", "rf", "rnn", "lstm", "gru")


def prepare(tmp, records):
    dumps = tmp / "dumps"
    dumps.mkdir()
    write_dump(records, dumps / "synthetic.jsonl")
    dataset = tmp / "dataset.jsonl"
    assert run(["prepare", "--in", str(dumps), "--out", str(dataset)]) == 0
    return dataset


def evaluate(tmp, model_path, dataset, name):
    out = tmp / f"eval_{name}"
    assert run(["evaluate", "--model", str(model_path), "--data", str(dataset), "--out", str(out)]) == 0
    return json.loads((out / "report.json").read_text())


def test_criterion_1_nb_oracle():
    rnd = random.Random(2024)
    start = time.perf_counter()
    worst, cases = 0.0, 0
    for n_docs in range(1, 6):
        for n_terms in range(1, 5):
            for _ in range(40):
                docs = [[rnd.choice([0.0, 1.0, 2.0, 3.0, rnd.random()]) for _ in range(n_terms)] for _ in range(n_docs)]
                labels = [rnd.randint(0, 1) for _ in range(n_docs)]
                alpha = rnd.choice([1.0, 0.5, 0.1])
                query = [rnd.choice([0.0, 1.0, rnd.random()]) for _ in range(n_terms)]
                got = nb_scores(nb_train(np.array(docs), labels, alpha=alpha, n_classes=2), np.array([query]))[0]
                want = brute_force_nb_scores(docs, labels, query, alpha, 2)
                for g, w in zip(got, want):
                    worst = max(worst, 0.0 if g == w else abs(g - w))
                cases += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    record(1, ok,
           f"{cases} corpora, max log-score diff {worst:.1e} (<= 1e-12), {elapsed:.2f}s (< 1s)")
    assert ok


def test_criterion_2_tree_oracle():
    rnd = random.Random(7)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n, f = rnd.randint(2, 20), rnd.randint(1, 5)
        levels = rnd.choice([[0.0, 1.0], [0.0, 0.5, 1.0, 2.0], [round(rnd.random(), 2) for _ in range(6)]])
        rows = [[rnd.choice(levels) for _ in range(f)] for _ in range(n)]
        labels = [rnd.randint(0, rnd.choice([1, 2, 8])) for _ in range(n)]
        cands = list(range(f))
        got = best_split(np.array(rows), labels, cands)
        want = exhaustive_best_split(rows, labels, cands)
        same = (got is None and want is None) or (
            got is not None and want is not None
            and got[:2] == want[:2] and abs(got[2] - want[2]) <= 1e-12
        )
        mismatches += not same
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 5.0
    record(2, ok, f"200 fixtures, {mismatches} mismatches, {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_3_gradient_checks():
    start = time.perf_counter()
    errors = {kind: gradient_check(kind, seed=0, eps=1e-5, V=20, E=5, H=8, K=3, T=6) for kind in KINDS}
    elapsed = time.perf_counter() - start
    ok = all(e < 1e-4 for e in errors.values()) and elapsed < 30.0
    detail = ", ".join(f"{k} {e:.1e}" for k, e in errors.items())
    record(3, ok, f"max rel. error {detail} (< 1e-4), {elapsed:.1f}s (< 30s)")
    assert ok


@pytest.mark.slow
def test_criterion_4_end_to_end(tmp_path):
    start = time.perf_counter()
    dataset = prepare(tmp_path, separable_corpus(300, seed=0))
    accuracies = {}
    for model in MODELS:
        path = tmp_path / f"{model}.ghic"
        assert run(["train", "--data", str(dataset), "--model", model, "--out", str(path)]) == 0
        accuracies[model] = evaluate(tmp_path, path, dataset, model)["accuracy"]
    elapsed = time.perf_counter() - start
    ok = all(a >= 0.9 for a in accuracies.values()) and elapsed < 300.0
    detail = ", ".join(f"{m} {a:.3f}" for m, a in accuracies.items())
    record(4, ok,
           f"test accuracy {detail} (>= 0.9, baseline 0.111), {elapsed:.0f}s (< 300s)")
    assert ok


@pytest.mark.slow
def test_criterion_5_imbalance_ordering(tmp_path):
    counts = skewed_counts(300, 20)
    dataset = prepare(tmp_path, separable_corpus(counts, seed=0))
    macro = {}
    for weighted in (True, False):
        name = "weighted" if weighted else "unweighted"
        path = tmp_path / f"gru_{name}.ghic"
        args = ["train", "--data", str(dataset), "--model", "gru", "--seed", "7", "--out", str(path)]
        assert run(args + (["--class-weights"] if weighted else [])) == 0
        macro[name] = evaluate(tmp_path, path, dataset, name)["macro"]["f1"]
    ok = macro["weighted"] >= macro["unweighted"]
    record(5, ok,
           f"20:1 skew {counts[0]}..{counts[-1]}, GRU seed 7 macro-F1 weighted {macro['weighted']:.4f} "
           f">= unweighted {macro['unweighted']:.4f}")
    assert ok


def test_criterion_6_sanity_constants():
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(9), 40)
    ids = rng.integers(2, 1000, size=(len(labels), 40))
    lengths = rng.integers(10, 41, size=len(labels))
    losses = {}
    for kind in KINDS:
        model = init_model(kind, 1000, 100, 100, seed=0)
        losses[kind] = batch_loss(forward_batch(model, ids, lengths)[0], labels)[0]
    cfg = TrainingConfig()
    schedule = [sorted({cfg.lr_at(e) for e in range(block, block + 10)}) for block in range(0, 50, 10)]
    want = [[1e-3], [1e-4], [1e-5], [1e-6], [1e-7]]
    ok = all(abs(v - math.log(9)) <= 0.05 for v in losses.values()) and schedule == want
    detail = ", ".join(f"{k} {v:.4f}" for k, v in losses.items())
    record(6, ok,
           f"untrained loss {detail} (ln 9 = {math.log(9):.4f} +/- 0.05); lr blocks {[s[0] for s in schedule]}")
    assert ok


def test_criterion_7_metric_identities():
    rng = np.random.default_rng(1)
    bad_micro = 0
    for _ in range(1000):
        cm = rng.integers(0, 30, size=(9, 9)) * (rng.random((9, 9)) < rng.random())
        cm[rng.integers(9), rng.integers(9)] += 1
        bad_micro += micro_f1(cm) != metrics(cm).accuracy
    worst_dev = 0.0
    for fraction in (0.7, 0.8):
        for trial in range(200):
            labels = rng.integers(0, 9, rng.integers(1, 400)).tolist()
            train, _ = stratified_split(list(range(len(labels))), labels, fraction, trial)
            for c in set(labels):
                got = sum(1 for i in train if labels[i] == c)
                worst_dev = max(worst_dev, abs(got - labels.count(c) * fraction))
    ok = bad_micro == 0 and worst_dev < 1
    record(7, ok,
           f"micro-F1 != accuracy on {bad_micro}/1000 matrices; max split deviation {worst_dev:.2f} (< 1)")
    assert ok


def test_criterion_8_determinism(tmp_path):
    dataset = prepare(tmp_path, separable_corpus(40, seed=5))
    small = ["--epochs", "3", "--hidden", "16", "--embedding", "16"]
    extra = {"nb": [], "rf": ["--trees", "10"], "rnn": small, "lstm": small, "gru": small + ["--class-weights"]}
    differing = []
    for model in MODELS:
        out = tmp_path / model / "model.ghic"
        digests = []
        for _ in range(2):
            assert run(["train", "--data", str(dataset), "--model", model, "--seed", "7",
                        "--out", str(out), *extra[model]]) == 0
            report = out.parent / "model_report"
            files = [out] + sorted(report.iterdir())
            digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files})
        if digests[0] != digests[1]:
            differing.append(model)
    ok = not differing
    record(8, ok,
           f"train x2 per model kind ({', '.join(MODELS)}): model + report bytes identical"
           + (f"; differing: {differing}" if differing else ""))
    assert ok


def test_criterion_9_porter_oracle():
    with open(os.path.join(DATA, "porter_reference.tsv"), encoding="utf-8") as fh:
        pairs = [line.rstrip("\n").split("\t") for line in fh if not line.startswith("#")]
    agree = sum(porter.stem(word) == stem for word, stem in pairs)
    rate = agree / len(pairs)
    ok = len(pairs) == 1000 and rate >= 0.999
    record(9, ok, f"{agree}/{len(pairs)} = {rate:.4f} (>= 0.999)")
    assert ok
