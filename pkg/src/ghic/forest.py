"""Random Forest of Gini decision trees, grown from scratch.

Trees are stored flat, one array per node attribute. Node 0 is the root;
leaves carry ``feature == -1``. A sample goes left when its value is
``<= threshold``; features absent from a sparse vector read as 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .features import SparseVector
from .labels import NUM_LABELS

LEAF = -1
_TOL = 1e-9


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray       # int64, LEAF for leaves
    threshold: np.ndarray     # float64
    left: np.ndarray          # int64 child index, -1 for leaves
    right: np.ndarray
    class_counts: np.ndarray  # (n_nodes, K) int64

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_labels(self) -> np.ndarray:
        return self.class_counts.argmax(axis=1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of dense ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            n = node[active]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] != LEAF
        return node


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[Tree, ...]
    n_features: int
    features_per_split: int
    seed: int
    bootstrap: bool = True

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    return 1.0 - float(np.sum((counts / n) ** 2))


def _split_scores(values: np.ndarray, labels: np.ndarray, n_classes: int):
    """Best threshold per column of ``values`` (n, f).

    Maximizes S = sum(cL^2)/nL + sum(cR^2)/nR, which minimizes the weighted
    child Gini n - S. Both sums are integers built from running counts:
    moving a sample of class y to the left adds 2*cL[y] + 1 to sum(cL^2).
    Returns (best S, threshold) per column; -inf for constant columns.
    """
    n, f = values.shape
    if n < 2:
        return np.full(f, -np.inf), np.full(f, np.nan)
    vals = np.ascontiguousarray(values.T)                  # (f, n): sort along rows
    totals = np.bincount(labels, minlength=n_classes)
    order = np.argsort(vals, axis=1, kind="stable")
    sorted_vals = np.take_along_axis(vals, order, axis=1)
    lab = labels[order]
    # occurrence rank of each sample within its class, in sorted order
    by_class = np.argsort(lab, axis=1, kind="stable")
    starts = np.concatenate([[0], np.cumsum(totals)[:-1]])
    rank = np.arange(n)[None, :] - starts[np.take_along_axis(lab, by_class, axis=1)]
    occ = np.empty_like(rank)
    np.put_along_axis(occ, by_class, rank, axis=1)
    sum_left = np.cumsum(2 * occ + 1, axis=1)[:, :-1]
    cross = np.cumsum(totals[lab], axis=1)[:, :-1]
    sum_right = int(np.dot(totals, totals)) - 2 * cross + sum_left
    n_left = np.arange(1, n, dtype=np.float64)
    score = sum_left / n_left + sum_right / (n - n_left)
    valid = sorted_vals[:, :-1] < sorted_vals[:, 1:]
    score = np.where(valid, score, -np.inf)
    best_score = score.max(axis=1)
    # lowest threshold among (near-)ties
    pos = np.argmax(score >= best_score[:, None] - _TOL, axis=1)
    rows = np.arange(f)
    thresholds = (sorted_vals[rows, pos] + sorted_vals[rows, pos + 1]) / 2.0
    thresholds[~np.isfinite(best_score)] = np.nan
    return best_score, thresholds


def best_split(X, labels, candidate_features, n_classes: int = NUM_LABELS):
    """Split of minimal weighted Gini over the candidate features.

    Thresholds are midpoints between consecutive distinct values. Returns
    ``(feature, threshold, gini_gain)`` or None when no split lowers the
    impurity. Ties go to the lowest feature index, then the lowest threshold.
    """
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    candidates = sorted(set(int(f) for f in candidate_features))
    if len(labels) < 2 or not candidates:
        return None
    scores, thresholds = _split_scores(X[:, candidates], labels, n_classes)
    return _pick(candidates, scores, thresholds, np.bincount(labels, minlength=n_classes), len(labels))


def _pick(candidates, scores, thresholds, counts, n):
    best = None
    best_score = -np.inf
    for feat, score, thr in zip(candidates, scores, thresholds):
        if score > best_score + _TOL:
            best, best_score = (feat, float(thr)), score
    if best is None:
        return None
    parent = gini(counts)
    child = 1.0 - best_score / n
    gain = parent - child
    if gain <= _TOL:
        return None
    return best[0], best[1], float(gain)


class _TreeBuilder:
    def __init__(self, X, labels, n_classes, max_features, rng, max_depth=None, min_samples_split=2):
        self.X = X
        self.labels = labels
        self.n_classes = n_classes
        self.max_features = max_features
        self.rng = rng
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.feature, self.threshold, self.left, self.right, self.counts = [], [], [], [], []

    def _new_node(self, counts):
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts)
        return len(self.feature) - 1

    def _find_split(self, rows):
        """Score the first max_features non-constant features of a random permutation."""
        perm = self.rng.permutation(self.X.shape[1])
        lab = self.labels[rows]
        node_X = self.X[rows]
        varying = node_X.min(axis=0) < node_X.max(axis=0)
        feats = perm[varying[perm]][: self.max_features]
        if not len(feats):
            return None
        feats = np.sort(feats)
        scores, thresholds = _split_scores(node_X[:, feats], lab, self.n_classes)
        return _pick(feats.tolist(), scores, thresholds, np.bincount(lab, minlength=self.n_classes), len(rows))

    def build(self, rows: np.ndarray) -> Tree:
        stack = [(rows, None, False, 0)]
        while stack:
            node_rows, parent, is_left, depth = stack.pop()
            counts = np.bincount(self.labels[node_rows], minlength=self.n_classes).astype(np.int64)
            node = self._new_node(counts)
            if parent is not None:
                (self.left if is_left else self.right)[parent] = node
            pure = np.count_nonzero(counts) <= 1
            if pure or len(node_rows) < self.min_samples_split:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            split = self._find_split(node_rows)
            if split is None:
                continue
            feat, thr, _ = split
            self.feature[node] = feat
            self.threshold[node] = thr
            go_left = self.X[node_rows, feat] <= thr
            # right pushed first so the left subtree is numbered first
            stack.append((node_rows[~go_left], node, False, depth + 1))
            stack.append((node_rows[go_left], node, True, depth + 1))
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.counts, dtype=np.int64).reshape(-1, self.n_classes),
        )


def _dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)


def rf_train(
    X,
    labels,
    n_trees: int = 100,
    seed: int = 0,
    features_per_split: int | None = None,
    bootstrap: bool = True,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    n_classes: int = NUM_LABELS,
    n_jobs: int = 1,
) -> RandomForestModel:
    """Grow ``n_trees`` trees on bootstrap resamples.

    Each tree draws from its own substream of ``seed``, so the forest is the
    same whether trees are grown sequentially or in parallel.
    """
    X = _dense(X)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("cannot train a random forest on an empty training set")
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    n, n_features = X.shape
    k = features_per_split or max(1, math.ceil(math.sqrt(n_features)))
    streams = np.random.SeedSequence(seed).spawn(n_trees)

    def grow(stream):
        rng = np.random.default_rng(stream)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        builder = _TreeBuilder(X, labels, n_classes, k, rng, max_depth, min_samples_split)
        return builder.build(rows)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(grow, streams))
    else:
        trees = tuple(grow(s) for s in streams)
    return RandomForestModel(trees, n_features, k, seed, bootstrap)


def rf_votes(model: RandomForestModel, X) -> np.ndarray:
    """Per-class vote counts, shape (N, K)."""
    X = _dense(X)
    n_classes = model.trees[0].class_counts.shape[1]
    votes = np.zeros((X.shape[0], n_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for tree in model.trees:
        leaves = tree.apply(X)
        np.add.at(votes, (rows, tree.leaf_labels()[leaves]), 1)
    return votes


def rf_predict_many(model: RandomForestModel, X) -> tuple[np.ndarray, np.ndarray]:
    votes = rf_votes(model, X)
    return votes.argmax(axis=1), votes


def rf_predict(model: RandomForestModel, x: SparseVector) -> tuple[int, np.ndarray]:
    dense = np.zeros((1, model.n_features))
    dense[0, x.indices] = x.values
    votes = rf_votes(model, dense)[0]
    return int(np.argmax(votes)), votes
