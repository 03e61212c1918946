"""Independent reference computations shared by unit and acceptance tests.

Each oracle is written directly from the textbook definition in plain
Python (exact fractions where it matters), without touching the package's
vectorized code paths. The gradient check is the exception: it perturbs the
package's own forward pass, which the scalar unroll verifies separately.
"""

import math
from fractions import Fraction

import numpy as np


def brute_force_nb_scores(docs, labels, query, alpha, n_classes):
    """Joint log score ln P(c) + sum_t x_t ln theta_ct for every class."""
    n_terms = len(docs[0])
    scores = []
    for c in range(n_classes):
        members = [d for d, y in zip(docs, labels) if y == c]
        if not members:
            scores.append(-math.inf)
            continue
        log_prior = math.log(len(members) / len(docs))
        totals = [sum(d[t] for d in members) for t in range(n_terms)]
        denom = sum(totals) + alpha * n_terms
        s = log_prior
        for t in range(n_terms):
            if query[t]:
                s += query[t] * math.log((totals[t] + alpha) / denom)
        scores.append(s)
    return scores


def _gini_sum(labels):
    """n * Gini(labels) as an exact fraction."""
    n = len(labels)
    if n == 0:
        return Fraction(0)
    counts = {}
    for y in labels:
        counts[y] = counts.get(y, 0) + 1
    return n - Fraction(sum(c * c for c in counts.values()), n)


def exhaustive_best_split(rows, labels, candidate_features):
    """Enumerate every (feature, midpoint) pair; exact weighted Gini.

    Returns (feature, threshold, gain) minimizing the child impurity, ties to
    the lowest feature then lowest threshold, or None when nothing improves.
    """
    n = len(labels)
    parent = _gini_sum(labels)
    best = None
    best_impurity = parent
    for f in sorted(candidate_features):
        values = sorted(set(r[f] for r in rows))
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2.0
            left = [y for r, y in zip(rows, labels) if r[f] <= thr]
            right = [y for r, y in zip(rows, labels) if r[f] > thr]
            impurity = _gini_sum(left) + _gini_sum(right)
            if impurity < best_impurity:
                best, best_impurity = (f, thr), impurity
    if best is None:
        return None
    return best[0], best[1], float((parent - best_impurity) / n)


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def scalar_cell(kind, x, h, c, W, U, b):
    """One recurrent step written element by element from the cell equations.

    W is (E, G*H), U is (H, G*H), b is (G*H,), gates stacked column-wise in
    the order simple: [a]; lstm: [i, f, o, g]; gru: [z, r, n].
    """
    E, H = len(x), len(h)

    def affine(gate, j, hvec=h):
        col = gate * H + j
        return (sum(x[e] * W[e][col] for e in range(E))
                + sum(hvec[k] * U[k][col] for k in range(H))
                + b[col])

    if kind == "simple":
        return [math.tanh(affine(0, j)) for j in range(H)], None
    if kind == "lstm":
        h_new, c_new = [], []
        for j in range(H):
            i = sigmoid(affine(0, j))
            f = sigmoid(affine(1, j))
            o = sigmoid(affine(2, j))
            g = math.tanh(affine(3, j))
            cj = f * c[j] + i * g
            c_new.append(cj)
            h_new.append(o * math.tanh(cj))
        return h_new, c_new
    # gru: reset gate applied to h before the recurrent map of the candidate
    z = [sigmoid(affine(0, j)) for j in range(H)]
    r = [sigmoid(affine(1, j)) for j in range(H)]
    rh = [r[k] * h[k] for k in range(H)]
    cand = [math.tanh(affine(2, j, rh)) for j in range(H)]
    return [(1 - z[j]) * h[j] + z[j] * cand[j] for j in range(H)], None


def scalar_logits(kind, params, ids):
    """Unroll the cell over ``ids`` and apply the output map, all in floats."""
    emb = params["embedding"].tolist()
    W, U, b = params["W"].tolist(), params["U"].tolist(), params["b"].tolist()
    W_out, b_out = params["W_out"].tolist(), params["b_out"].tolist()
    H = len(U)
    h, c = [0.0] * H, ([0.0] * H if kind == "lstm" else None)
    for tok in ids:
        h, c_new = scalar_cell(kind, emb[tok], h, c, W, U, b)
        c = c_new if kind == "lstm" else None
    K = len(b_out)
    return [sum(h[j] * W_out[j][k] for j in range(H)) + b_out[k] for k in range(K)]


def confusion_from_pairs(preds, truths, k):
    cm = np.zeros((k, k), dtype=np.int64)
    for p, t in zip(preds, truths):
        cm[t][p] += 1
    return cm


def gradient_check(kind, seed=0, eps=1e-5, V=20, E=5, H=8, K=3, T=6, class_weights=None):
    """Max relative error between BPTT gradients and central differences.

    Relative error per entry is |a - n| / max(|a|, |n|, 1e-7), the floor
    keeping entries whose true gradient is ~0 from dividing by round-off.
    """
    from ghic.recurrent import batch_loss, forward_batch, init_model, loss_and_grads

    rng = np.random.default_rng(seed)
    model = init_model(kind, V, E, H, n_classes=K, seed=seed, scale=0.5)
    for name in ("b", "b_out"):
        model.params[name][:] = rng.uniform(-0.5, 0.5, model.params[name].shape)
    ids = rng.integers(2, V, size=(3, T))
    lengths = np.array([T, T - 2, 1])
    labels = rng.integers(0, K, size=3)
    _, grads = loss_and_grads(model, ids, lengths, labels, class_weights)

    def loss():
        return batch_loss(forward_batch(model, ids, lengths)[0], labels, class_weights)[0]

    worst = 0.0
    for name, param in model.params.items():
        flat = param.reshape(-1)
        analytic = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss()
            flat[i] = orig - eps
            down = loss()
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            a = analytic[i]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-7))
    return worst
