"""Train, evaluate and predict on labeled examples, end to end."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabeledExample, label_histogram, select_field
from .evaluation import EvaluationReport, confusion, stratified_split
from .features import build_vocabulary, encode_batch, tfidf_fit, tfidf_matrix
from .forest import rf_predict_many, rf_train
from .labels import NUM_LABELS
from .model_store import RECURRENT_KIND, ModelBundle
from .naive_bayes import nb_predict_many, nb_train
from .recurrent import TrainingConfig, compute_class_weights, init_model, predict_proba, train
from .textprep import DEFAULT_CONFIG, PipelineConfig, preprocess

logger = logging.getLogger(__name__)

CLI_KINDS = {"nb": "naive_bayes", "rf": "random_forest", "rnn": "rnn", "lstm": "lstm", "gru": "gru"}
DISPLAY = {"naive_bayes": "Naive Bayes", "random_forest": "Random Forest", "rnn": "RNN", "lstm": "LSTM", "gru": "GRU"}


def default_split(model_kind: str) -> float:
    return 0.7 if model_kind in RECURRENT_KIND else 0.8


def default_field(model_kind: str) -> str:
    return "both" if model_kind in RECURRENT_KIND else "body"


def model_id(bundle: ModelBundle) -> str:
    name = DISPLAY[bundle.model_kind]
    if bundle.is_recurrent:
        if bundle.training.get("class_weighted"):
            name += " (class-weighted)"
        return name
    return f"{name} (using {bundle.field})"


@dataclass
class TrainResult:
    bundle: ModelBundle
    report: EvaluationReport
    train_size: int
    test_size: int


def _tokens(texts: Sequence[str], cfg: PipelineConfig) -> list[list[str]]:
    return [preprocess(t, cfg) for t in texts]


def train_model(
    examples: Sequence[LabeledExample],
    model_kind: str,
    field: str | None = None,
    split: float | None = None,
    seed: int = 0,
    class_weighted: bool = False,
    n_trees: int = 100,
    alpha: float = 1.0,
    tfidf_max_features: int | None = None,
    recurrent: TrainingConfig | None = None,
    pipeline_cfg: PipelineConfig = DEFAULT_CONFIG,
    n_jobs: int = 1,
) -> TrainResult:
    """Split, fit and score one model; the report covers the held-out part."""
    model_kind = CLI_KINDS.get(model_kind, model_kind)
    field = field or default_field(model_kind)
    split = split if split is not None else default_split(model_kind)
    labels = [ex.label for ex in examples]
    train_ex, test_ex = stratified_split(list(examples), labels, split, seed)
    if not train_ex:
        raise ValueError("training split is empty")
    train_tokens = _tokens([ex.text(field) for ex in train_ex], pipeline_cfg)
    y_train = np.array([ex.label for ex in train_ex], dtype=np.int64)
    training = {"split": split, "seed": seed, "train_size": len(train_ex), "test_size": len(test_ex)}

    if model_kind in ("naive_bayes", "random_forest"):
        tfidf = tfidf_fit(train_tokens, tfidf_max_features)
        X = tfidf_matrix(tfidf, train_tokens)
        training["tfidf_max_features"] = tfidf_max_features
        if model_kind == "naive_bayes":
            model = nb_train(X, y_train, alpha)
            training["alpha"] = alpha
        else:
            model = rf_train(X, y_train, n_trees=n_trees, seed=seed, n_jobs=n_jobs)
            training["n_trees"] = n_trees
        bundle = ModelBundle(model_kind, pipeline_cfg, tfidf, model, field, training)
    else:
        cfg = recurrent or TrainingConfig()
        cfg = TrainingConfig(**{**cfg.to_json(), "seed": seed, "split_ratio": split})
        if class_weighted:
            cfg.class_weights = compute_class_weights(label_histogram(train_ex)).tolist()
        vocab = build_vocabulary(train_tokens, cfg.max_vocab, mode="sequence")
        ids, lengths = encode_batch(vocab, train_tokens, cfg.max_len)
        init = init_model(RECURRENT_KIND[model_kind], vocab.size, cfg.embedding_dim, cfg.hidden_dim,
                          seed=seed, scale=cfg.init_scale)
        model, loss_curve = train(init, ids, lengths, y_train, cfg)
        training.update(cfg.to_json())
        training["class_weighted"] = class_weighted
        training["loss_curve"] = loss_curve
        bundle = ModelBundle(model_kind, pipeline_cfg, vocab, model, field, training)

    report = evaluate_examples(bundle, test_ex or train_ex)
    return TrainResult(bundle, report, len(train_ex), len(test_ex))


def predict_texts(bundle: ModelBundle, texts: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Predicted label ids and per-class scores (posteriors, or vote shares for forests)."""
    tokens = _tokens(texts, bundle.pipeline)
    if not tokens:
        return np.zeros(0, dtype=np.int64), np.zeros((0, NUM_LABELS))
    if bundle.model_kind == "naive_bayes":
        return nb_predict_many(bundle.model, tfidf_matrix(bundle.features, tokens))
    if bundle.model_kind == "random_forest":
        labels, votes = rf_predict_many(bundle.model, tfidf_matrix(bundle.features, tokens))
        return labels, votes / bundle.model.n_trees
    max_len = int(bundle.training.get("max_len", 200))
    ids, lengths = encode_batch(bundle.features, tokens, max_len)
    proba = predict_proba(bundle.model, ids, lengths)
    return proba.argmax(axis=1), proba


def evaluate_examples(bundle: ModelBundle, examples: Sequence[LabeledExample]) -> EvaluationReport:
    preds, _ = predict_texts(bundle, [ex.text(bundle.field) for ex in examples])
    truths = [ex.label for ex in examples]
    curve = bundle.training.get("loss_curve")
    return EvaluationReport(model_id(bundle), confusion(preds, truths), loss_curve=curve)


def held_out(bundle: ModelBundle, examples: Sequence[LabeledExample]) -> list[LabeledExample]:
    """Re-derive the test part of the split the bundle was trained with."""
    split = bundle.training.get("split")
    seed = bundle.training.get("seed", 0)
    if split is None:
        return list(examples)
    _, test = stratified_split(list(examples), [ex.label for ex in examples], split, seed)
    return test


def issue_text(obj: dict, field: str) -> str:
    return select_field(obj.get("title") or "", obj.get("body"), field)
