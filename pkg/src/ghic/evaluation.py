"""Stratified splits, confusion matrices, per-label metrics and report files."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence, TypeVar

import numpy as np

from .labels import LABELS, NUM_LABELS

logger = logging.getLogger(__name__)

T = TypeVar("T")


def round_half_up(x: Decimal) -> int:
    return int(x.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def stratified_split(
    items: Sequence[T],
    labels: Sequence[int],
    train_fraction: float,
    seed: int,
    classes: Sequence[int] | None = None,
) -> tuple[list[T], list[T]]:
    """Per class, send round-half-up(n_c * fraction) shuffled items to train.

    Both halves keep the input order. ``classes`` lists the classes that must
    be non-empty; by default only the classes present are split.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    if len(items) != len(labels):
        raise ValueError("items and labels differ in length")
    if not items:
        raise ValueError("cannot split an empty dataset")
    labels = np.asarray(labels, dtype=np.int64)
    present = sorted(set(labels.tolist()))
    if classes is not None:
        empty = [c for c in classes if c not in present]
        if empty:
            raise ValueError(f"classes {empty} have no examples to split")
    frac = Decimal(repr(train_fraction))
    rng = np.random.default_rng(seed)
    in_train = np.zeros(len(items), dtype=bool)
    for c in present:
        idx = np.flatnonzero(labels == c)
        k = round_half_up(len(idx) * frac)
        in_train[rng.permutation(idx)[:k]] = True
    train = [items[i] for i in np.flatnonzero(in_train)]
    test = [items[i] for i in np.flatnonzero(~in_train)]
    return train, test


def confusion(preds: Sequence[int], truths: Sequence[int], n_classes: int = NUM_LABELS) -> np.ndarray:
    """cm[t][p] counts true label t predicted as p."""
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if len(preds) != len(truths):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(truths)} truths")
    if len(preds) == 0:
        raise ValueError("confusion matrix needs at least one prediction")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truths, preds), 1)
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    per_class: tuple[ClassMetrics, ...]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


def _ratio(num: float, den: float, what: str, label: int) -> float:
    if den == 0:
        logger.warning("%s of label %r is 0/0; reported as 0", what, LABELS[label] if label < NUM_LABELS else label)
        return 0.0
    return num / den


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def metrics(cm: np.ndarray) -> Metrics:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total <= 0:
        raise ValueError("metrics need a non-empty confusion matrix")
    per_class = []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        support = int(cm[c].sum())
        predicted = int(cm[:, c].sum())
        if support == 0 and predicted == 0:
            per_class.append(ClassMetrics(0.0, 0.0, 0.0, 0))
            continue
        p = _ratio(tp, predicted, "precision", c)
        r = _ratio(tp, support, "recall", c)
        per_class.append(ClassMetrics(p, r, f1_score(p, r), support))
    supported = [m for m in per_class if m.support > 0]
    return Metrics(
        per_class=tuple(per_class),
        accuracy=float(np.trace(cm)) / total,
        macro_precision=float(np.mean([m.precision for m in supported])),
        macro_recall=float(np.mean([m.recall for m in supported])),
        macro_f1=float(np.mean([m.f1 for m in supported])),
    )


def micro_f1(cm: np.ndarray) -> float:
    """Pooled F1 = 2TP / (2TP + FP + FN) over all classes."""
    cm = np.asarray(cm, dtype=np.int64)
    tp = int(np.trace(cm))
    off = int(cm.sum()) - tp   # every off-diagonal cell is one FP and one FN
    fp = fn = off
    return 2 * tp / (2 * tp + fp + fn)


@dataclass
class EvaluationReport:
    model_id: str
    confusion: np.ndarray
    metrics: Metrics = field(init=False)
    loss_curve: list[float] | None = None

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        self.metrics = metrics(self.confusion)

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy

    def to_json(self) -> dict:
        m = self.metrics
        out = {
            "model": self.model_id,
            "accuracy": m.accuracy,
            "macro": {"precision": m.macro_precision, "recall": m.macro_recall, "f1": m.macro_f1},
            "per_label": {
                LABELS[c]: {"precision": cm.precision, "recall": cm.recall, "f1": cm.f1, "support": cm.support}
                for c, cm in enumerate(m.per_class)
            },
            "confusion": {"labels": list(LABELS), "matrix": self.confusion.tolist()},
            "support_total": int(self.confusion.sum()),
        }
        if self.loss_curve is not None:
            out["loss_curve"] = list(self.loss_curve)
        return out


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def emit_report(report: EvaluationReport, out_dir: str | os.PathLike) -> list[str]:
    """Write report.json, classification_report.csv, confusion.csv and, for
    neural models, loss_curve.csv. Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)

    path = os.path.join(out_dir, "classification_report.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["label", "precision", "recall", "f1", "support"])
        for c, cm in enumerate(report.metrics.per_class):
            w.writerow([LABELS[c], repr(cm.precision), repr(cm.recall), repr(cm.f1), cm.support])
    written.append(path)

    path = os.path.join(out_dir, "confusion.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["true\\predicted", *LABELS])
        for c, row in enumerate(report.confusion.tolist()):
            w.writerow([LABELS[c], *row])
    written.append(path)

    if report.loss_curve is not None:
        path = os.path.join(out_dir, "loss_curve.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = _csv_writer(fh)
            w.writerow(["epoch", "loss"])
            for epoch, loss in enumerate(report.loss_curve, start=1):
                w.writerow([epoch, repr(float(loss))])
        written.append(path)
    return written
