"""Multinomial Naive Bayes over TF-IDF weights (used as soft term counts)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .features import SparseVector
from .labels import NUM_LABELS


@dataclass(frozen=True)
class NaiveBayesModel:
    log_priors: np.ndarray       # (K,)
    log_likelihood: np.ndarray   # (K, V)
    alpha: float = 1.0

    @property
    def vocab_size(self) -> int:
        return self.log_likelihood.shape[1]


def nb_train(X, labels, alpha: float = 1.0, n_classes: int = NUM_LABELS) -> NaiveBayesModel:
    """Fit priors ln(n_c/N) and likelihoods ln((W_ct + a) / (W_c + a V)).

    ``X`` is an (N, V) matrix, dense or sparse, of non-negative feature
    weights. Classes with no examples get a prior of -inf.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0 or len(labels) == 0:
        raise ValueError("cannot train Naive Bayes on an empty training set")
    if X.shape[0] != len(labels):
        raise ValueError("X and labels differ in length")
    n_features = X.shape[1]
    onehot = np.zeros((len(labels), n_classes))
    onehot[np.arange(len(labels)), labels] = 1.0
    class_counts = onehot.sum(axis=0)
    with np.errstate(divide="ignore"):
        log_priors = np.log(class_counts) - np.log(len(labels))
    weights = np.asarray(sp.csr_matrix(X).T @ onehot).T  # (K, V) summed weight per class/term
    smoothed = weights + alpha
    log_likelihood = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    if n_features == 0:
        log_likelihood = np.zeros((n_classes, 0))
    return NaiveBayesModel(log_priors, log_likelihood, float(alpha))


def nb_scores(model: NaiveBayesModel, X) -> np.ndarray:
    """Joint log scores, shape (N, K)."""
    X = sp.csr_matrix(X)
    return np.asarray(X @ model.log_likelihood.T) + model.log_priors


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def nb_predict_many(model: NaiveBayesModel, X) -> tuple[np.ndarray, np.ndarray]:
    scores = nb_scores(model, X)
    return scores.argmax(axis=1), softmax_rows(scores)


def nb_predict(model: NaiveBayesModel, x: SparseVector) -> tuple[int, np.ndarray]:
    score = model.log_priors.copy()
    if len(x):
        score = score + model.log_likelihood[:, x.indices] @ x.values
    posterior = softmax_rows(score[None, :])[0]
    return int(np.argmax(score)), posterior
