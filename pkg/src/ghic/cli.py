"""Command-line interface: fetch -> prepare -> train -> evaluate -> predict."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .corpus import (
    label_histogram,
    merge_and_clean,
    read_dataset,
    single_label_dataset,
    write_dataset,
    write_dump,
)
from .evaluation import emit_report
from .github import DEFAULT_BASE_URL, GitHubClient
from .labels import LABELS
from .model_store import load, save
from .pipeline import CLI_KINDS, evaluate_examples, held_out, issue_text, predict_texts, train_model
from .recurrent import TrainingConfig
from .synthetic import separable_corpus, skewed_counts

logger = logging.getLogger("ghic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _write_run_config(path: str, args: argparse.Namespace, extra: dict | None = None) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["ghic_version"] = __version__
    if extra:
        cfg.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def cmd_fetch(args) -> int:
    with open(args.repos, encoding="utf-8") as fh:
        repos = [line.strip() for line in fh if line.strip() and not line.lstrip().startswith("#")]
    os.makedirs(args.out, exist_ok=True)
    client = GitHubClient(args.token, base_url=args.base_url)
    results = client.fetch_many(repos, args.state, workers=args.workers)
    for repo, records in results.items():
        path = os.path.join(args.out, repo.replace("/", "__") + ".jsonl")
        write_dump(records, path)
        logger.info("%s: %d issues -> %s", repo, len(records), path)
    args_for_config = argparse.Namespace(**{k: v for k, v in vars(args).items() if k != "token"})
    _write_run_config(os.path.join(args.out, "run_config.json"), args_for_config, {"repos_list": repos})
    return 0


def _dump_files(directory: str) -> list[str]:
    files = sorted(glob.glob(os.path.join(directory, "*.jsonl")) + glob.glob(os.path.join(directory, "*.csv")))
    return files


def cmd_prepare(args) -> int:
    sources = _dump_files(args.input) if os.path.isdir(args.input) else [args.input]
    records = merge_and_clean(sources)
    examples = single_label_dataset(records)
    _ensure_parent(args.out)
    write_dataset(examples, args.out)
    hist = label_histogram(examples)
    stem = os.path.splitext(args.out)[0]
    with open(stem + ".histogram.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,count\n")
        for name, count in hist.as_dict().items():
            fh.write(f"{name},{count}\n")
        fh.write(f"total,{hist.total}\n")
    _write_run_config(stem + ".run_config.json", args, {"sources": sources, "records": len(records), "examples": len(examples)})
    logger.info("prepared %d labeled examples from %d records", len(examples), len(records))
    return 0


def _report_dir(model_path: str, given: str | None) -> str:
    if given:
        return given
    return os.path.splitext(model_path)[0] + "_report"


def cmd_train(args) -> int:
    examples = read_dataset(args.data)
    kind = CLI_KINDS[args.model]
    recurrent = TrainingConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        lr_step=args.lr_step,
        lr_gamma=args.gamma,
        max_vocab=args.vocab,
        max_len=args.max_len,
        embedding_dim=args.embedding,
        hidden_dim=args.hidden,
        clip_norm=args.clip,
        optimizer=args.optimizer,
    )
    result = train_model(
        examples,
        kind,
        field=args.field,
        split=args.split,
        seed=args.seed,
        class_weighted=args.class_weights,
        n_trees=args.trees,
        alpha=args.alpha,
        tfidf_max_features=args.tfidf_vocab,
        recurrent=recurrent,
    )
    _ensure_parent(args.out)
    save(result.bundle, args.out)
    report_dir = _report_dir(args.out, args.report_dir)
    emit_report(result.report, report_dir)
    _write_run_config(os.path.join(report_dir, "run_config.json"), args, {
        "resolved_field": result.bundle.field,
        "resolved_split": result.bundle.training["split"],
        "train_size": result.train_size,
        "test_size": result.test_size,
    })
    print(f"{result.report.model_id}: accuracy {result.report.accuracy:.4f} on {result.test_size} held-out issues")
    return 0


def cmd_evaluate(args) -> int:
    bundle = load(args.model)
    examples = read_dataset(args.data)
    if args.subset == "test":
        examples = held_out(bundle, examples)
    if not examples:
        raise ValueError("no examples to evaluate")
    report = evaluate_examples(bundle, examples)
    emit_report(report, args.out)
    _write_run_config(os.path.join(args.out, "run_config.json"), args, {"evaluated": len(examples)})
    print(f"{report.model_id}: accuracy {report.accuracy:.4f} on {len(examples)} issues")
    return 0


def cmd_predict(args) -> int:
    bundle = load(args.model)
    rows = []
    with open(args.input, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    labels, scores = predict_texts(bundle, [issue_text(r, bundle.field) for r in rows])
    _ensure_parent(args.out)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for row, label, score in zip(rows, labels.tolist(), np.asarray(scores).tolist()):
            row = dict(row)
            row["predicted_label"] = LABELS[label]
            row["scores"] = dict(zip(LABELS, score))
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    _write_run_config(os.path.splitext(args.out)[0] + ".run_config.json", args, {"predicted": len(rows)})
    return 0


def cmd_synth(args) -> int:
    per_class = skewed_counts(args.per_class, args.skew) if args.skew else args.per_class
    records = separable_corpus(per_class, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_dump(records, os.path.join(args.out, "synthetic.jsonl"))
    _write_run_config(os.path.join(args.out, "run_config.json"), args, {"records": len(records)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ghic", description="GitHub issue label classification")
    parser.add_argument("--version", action="version", version=f"ghic {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fetch", help="download issues through the GitHub REST API")
    p.add_argument("--repos", required=True, help="file with one owner/name per line")
    p.add_argument("--out", required=True, help="output directory for per-repo dumps")
    p.add_argument("--state", choices=("open", "closed", "all"), default="all")
    p.add_argument("--token", default=None, help="API token (default: $GITHUB_TOKEN)")
    p.add_argument("--base-url", default=DEFAULT_BASE_URL)
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("prepare", help="merge, clean and single-label issue dumps")
    p.add_argument("--in", dest="input", required=True, help="dump directory or a single dump file")
    p.add_argument("--out", required=True, help="dataset .jsonl to write")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model and report on the held-out split")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, choices=tuple(CLI_KINDS))
    p.add_argument("--field", choices=("title", "body", "both"), default=None,
                   help="text field (default: body for nb/rf, both for neural models)")
    p.add_argument("--split", type=float, default=None, help="train fraction (default 0.8 classic, 0.7 neural)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model bundle path (.ghic)")
    p.add_argument("--report-dir", default=None, help="default: <out stem>_report/")
    p.add_argument("--class-weights", action="store_true", help="weight the loss by inverse class frequency")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.0, help="Naive Bayes smoothing")
    p.add_argument("--tfidf-vocab", type=int, default=None, help="cap on TF-IDF vocabulary (default: uncapped)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--embedding", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lr-step", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--vocab", type=int, default=10_000)
    p.add_argument("--max-len", type=int, default=200)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--subset", choices=("test", "all"), default="test",
                   help="test: re-derive the model's held-out split (default); all: every example")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label unlabeled issues")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True, help="issues .jsonl (dump schema)")
    p.add_argument("--out", required=True, help="labeled .jsonl to write")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="write a seeded synthetic issue dump")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=300)
    p.add_argument("--skew", type=float, default=None, help="largest:smallest class ratio")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # exits 2 with usage on bad flags
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - surfaced verbatim, exit 1
        print(f"ghic {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))
