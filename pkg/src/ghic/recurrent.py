"""Simple-RNN, LSTM and GRU sequence classifiers in numpy.

Batched forward pass over right-padded id matrices, exact backpropagation
through time, class-weighted cross-entropy and a step-decayed mini-batch
training loop. Gate blocks are stacked column-wise in ``W``, ``U`` and ``b``:
LSTM as (input, forget, output, candidate), GRU as (update, reset,
candidate). The classifier reads out the hidden state at the last non-PAD
position.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .labels import NUM_LABELS

logger = logging.getLogger(__name__)

KINDS = ("simple", "lstm", "gru")
GATES = {"simple": 1, "lstm": 4, "gru": 3}
PARAM_NAMES = ("embedding", "W", "U", "b", "W_out", "b_out")


class TrainingError(RuntimeError):
    pass


def sigmoid(x):
    # tanh form never overflows
    return 0.5 + 0.5 * np.tanh(0.5 * x)


@dataclass
class RecurrentModel:
    kind: str
    params: dict[str, np.ndarray]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        V, E = self.params["embedding"].shape
        H = self.params["U"].shape[0]
        G = GATES[self.kind]
        K = self.params["b_out"].shape[0]
        expected = {
            "embedding": (V, E), "W": (E, G * H), "U": (H, G * H), "b": (G * H,),
            "W_out": (H, K), "b_out": (K,),
        }
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{self.kind} parameter {name} has shape {self.params[name].shape}, expected {shape}")

    @property
    def vocab_size(self) -> int:
        return self.params["embedding"].shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.params["embedding"].shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.params["U"].shape[0]

    @property
    def n_classes(self) -> int:
        return self.params["b_out"].shape[0]

    def copy(self) -> RecurrentModel:
        return RecurrentModel(self.kind, {k: v.copy() for k, v in self.params.items()})


def init_model(kind: str, vocab_size: int, embedding_dim: int = 100, hidden_dim: int = 100,
               n_classes: int = NUM_LABELS, seed: int = 0, scale: float = 0.08) -> RecurrentModel:
    """Weights uniform in [-scale, scale], biases zero."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    G = GATES[kind]
    params = {
        "embedding": rng.uniform(-scale, scale, (vocab_size, embedding_dim)),
        "W": rng.uniform(-scale, scale, (embedding_dim, G * hidden_dim)),
        "U": rng.uniform(-scale, scale, (hidden_dim, G * hidden_dim)),
        "b": np.zeros(G * hidden_dim),
        "W_out": rng.uniform(-scale, scale, (hidden_dim, n_classes)),
        "b_out": np.zeros(n_classes),
    }
    return RecurrentModel(kind, params)


def cell_forward(kind, x_t, h_prev, c_prev, W, U, b):
    """One recurrence step; works on single vectors or (B, .) batches.

    Returns ``(h_t, c_t, cache)``; ``c_t`` is None unless ``kind == "lstm"``.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    H = U.shape[0]
    if x_t.shape[-1] != W.shape[0] or h_prev.shape[-1] != H or W.shape[1] != GATES[kind] * H:
        raise ValueError("dimension mismatch between inputs and cell weights")
    if (c_prev is not None) != (kind == "lstm"):
        raise ValueError("cell state must be given for lstm and only for lstm")
    return _cell_step(kind, x_t @ W + b, h_prev, c_prev, U)


def _cell_step(kind, xw, h_prev, c_prev, U):
    """Recurrence given the input projection ``xw = x W + b``."""
    H = U.shape[0]
    if kind == "simple":
        h = np.tanh(xw + h_prev @ U)
        return h, None, (h,)
    if kind == "lstm":
        z = xw + h_prev @ U
        ifo = sigmoid(z[..., :3 * H])
        i, f, o = ifo[..., :H], ifo[..., H:2 * H], ifo[..., 2 * H:]
        g = np.tanh(z[..., 3 * H:])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        return o * tc, c, (i, f, o, g, tc)
    zr = sigmoid(xw[..., :2 * H] + h_prev @ U[:, :2 * H])
    zg, r = zr[..., :H], zr[..., H:]
    n = np.tanh(xw[..., 2 * H:] + (r * h_prev) @ U[:, 2 * H:])
    h = h_prev + zg * (n - h_prev)
    return h, None, (zg, r, n)


@dataclass
class ForwardCache:
    order: np.ndarray         # batch rows sorted by decreasing length
    active: list              # rows [:active[t]] of the sorted batch are live at step t
    ids: np.ndarray           # sorted (B, T) ids
    x: np.ndarray             # sorted (B, T, E) embeddings
    h_prev: list
    c_prev: list
    step: list                # per-step cell caches
    h_final: np.ndarray       # original row order


def forward_batch(model: RecurrentModel, ids: np.ndarray, lengths: np.ndarray):
    """Logits (B, K) and the cache needed by :func:`backward`.

    Rows are processed longest-first so the live rows at step t form a
    prefix; a row stops updating after its last real token.
    """
    ids = np.asarray(ids, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if ids.ndim != 2 or len(lengths) != ids.shape[0]:
        raise ValueError("ids must be (B, T) with one length per row")
    p = model.params
    V = model.vocab_size
    B, H = ids.shape[0], model.hidden_dim
    T = int(lengths.max()) if B else 0
    order = np.argsort(-lengths, kind="stable")
    lengths = lengths[order]
    ids = ids[order, :T]
    mask = np.arange(T)[None, :] < lengths[:, None]
    live = ids[mask]
    if live.size and (live.min() < 0 or live.max() >= V):
        raise ValueError(f"token id out of range for vocabulary of size {V}")
    ids = np.where(mask, ids, 0)
    x = p["embedding"][ids]                     # (B, T, E)
    xw = x @ p["W"] + p["b"]                    # input projections for every step
    active = [int(np.count_nonzero(lengths > t)) for t in range(T)]
    h = np.zeros((B, H))
    c = np.zeros((B, H)) if model.kind == "lstm" else None
    hs, cs, steps = [], [], []
    for t in range(T):
        n = active[t]
        h_prev = h[:n].copy()
        c_prev = c[:n].copy() if c is not None else None
        h_new, c_new, cache = _cell_step(model.kind, xw[:n, t], h_prev, c_prev, p["U"])
        hs.append(h_prev)
        cs.append(c_prev)
        steps.append(cache)
        h[:n] = h_new
        if c is not None:
            c[:n] = c_new
    h_final = np.empty_like(h)
    h_final[order] = h
    logits = h_final @ p["W_out"] + p["b_out"]
    return logits, ForwardCache(order, active, ids, x, hs, cs, steps, h_final)


def forward_sequence(model: RecurrentModel, ids, true_length: int):
    logits, cache = forward_batch(model, np.asarray(ids)[None, :], np.array([true_length]))
    return logits[0], cache


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def weighted_cross_entropy(logits, label: int, class_weights=None) -> float:
    """Single-example loss w[label] * -log softmax(logits)[label]."""
    w = 1.0 if class_weights is None else float(class_weights[label])
    return w * float(-log_softmax(np.asarray(logits, dtype=np.float64))[label])


def batch_loss(logits: np.ndarray, labels: np.ndarray, class_weights=None):
    """Weight-normalized mean sum_i w_i nll_i / sum_i w_i and its logit gradient."""
    labels = np.asarray(labels, dtype=np.int64)
    B = len(labels)
    w = np.ones(B) if class_weights is None else np.asarray(class_weights, dtype=np.float64)[labels]
    if np.all(w == w[0]):
        w = np.ones(B)  # equal weights cancel; make that exact in floating point too
    logp = log_softmax(logits)
    nll = -logp[np.arange(B), labels]
    total_w = w.sum()
    loss = float(np.dot(w, nll) / total_w)
    grad = np.exp(logp)
    grad[np.arange(B), labels] -= 1.0
    grad *= (w / total_w)[:, None]
    return loss, grad


def backward(model: RecurrentModel, cache: ForwardCache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the batch loss for every parameter (full BPTT)."""
    p = model.params
    kind = model.kind
    H = model.hidden_dim
    U = p["U"]
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    grads["W_out"] = cache.h_final.T @ dlogits
    grads["b_out"] = dlogits.sum(axis=0)
    dh = (dlogits @ p["W_out"].T)[cache.order]
    B, T = cache.ids.shape
    G = GATES[kind]
    dc = np.zeros_like(dh) if kind == "lstm" else None
    da_all = np.zeros((B, T, G * H))   # gradient w.r.t. the input projections
    dU = grads["U"]
    for t in range(T - 1, -1, -1):
        n = cache.active[t]
        h_prev = cache.h_prev[t]
        dh_t = dh[:n]
        if kind == "simple":
            (h_new,) = cache.step[t]
            da = dh_t * (1.0 - h_new * h_new)
            dU += h_prev.T @ da
            dh[:n] = da @ U.T
        elif kind == "lstm":
            i, f, o, g, tc = cache.step[t]
            dc_t = dc[:n] + dh_t * o * (1.0 - tc * tc)
            da = np.empty((n, 4 * H))
            da[:, :H] = dc_t * g * i * (1.0 - i)
            da[:, H:2 * H] = dc_t * cache.c_prev[t] * f * (1.0 - f)
            da[:, 2 * H:3 * H] = dh_t * tc * o * (1.0 - o)
            da[:, 3 * H:] = dc_t * i * (1.0 - g * g)
            dU += h_prev.T @ da
            dh[:n] = da @ U.T
            dc[:n] = dc_t * f
        else:
            zg, r, n_t = cache.step[t]
            da = np.empty((n, 3 * H))
            da_n = da[:, 2 * H:]
            np.multiply(dh_t * zg, 1.0 - n_t * n_t, out=da_n)
            da[:, :H] = dh_t * (n_t - h_prev) * zg * (1.0 - zg)
            drh = da_n @ U[:, 2 * H:].T
            da[:, H:2 * H] = drh * h_prev * r * (1.0 - r)
            da_zr = da[:, :2 * H]
            dU[:, :2 * H] += h_prev.T @ da_zr
            dU[:, 2 * H:] += (r * h_prev).T @ da_n
            dh[:n] = dh_t * (1.0 - zg) + drh * r + da_zr @ U[:, :2 * H].T
        da_all[:n, t] = da
    if T:
        flat_da = da_all.reshape(B * T, G * H)
        grads["W"] = cache.x.reshape(B * T, -1).T @ flat_da
        grads["b"] = flat_da.sum(axis=0)
        dx = flat_da @ p["W"].T
        # padded positions carry zero gradient and PAD-safe id 0
        np.add.at(grads["embedding"], cache.ids.reshape(-1), dx)
    return grads


def loss_and_grads(model: RecurrentModel, ids, lengths, labels, class_weights=None):
    logits, cache = forward_batch(model, ids, lengths)
    loss, dlogits = batch_loss(logits, labels, class_weights)
    return loss, backward(model, cache, dlogits)


def compute_class_weights(counts) -> np.ndarray:
    """w[c] = N / (K * n_c); every class must be present."""
    counts = np.asarray(getattr(counts, "counts", counts), dtype=np.float64)
    zero = np.flatnonzero(counts <= 0)
    if len(zero):
        raise ValueError(
            f"class weights undefined: classes {zero.tolist()} have no examples; "
            "drop or merge those classes before training"
        )
    return counts.sum() / (len(counts) * counts)


@dataclass
class TrainingConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.001
    lr_step: int = 10
    lr_gamma: float = 0.1
    class_weights: list[float] | None = None
    max_vocab: int = 10_000
    split_ratio: float = 0.7
    seed: int = 0
    max_len: int = 200
    embedding_dim: int = 100
    hidden_dim: int = 100
    clip_norm: float = 5.0
    init_scale: float = 0.08
    optimizer: str = "adam"

    def __post_init__(self):
        for name in ("epochs", "batch_size", "learning_rate", "lr_step", "lr_gamma", "max_vocab",
                     "max_len", "embedding_dim", "hidden_dim", "clip_norm", "init_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be sgd or adam")
        if self.class_weights is not None:
            self.class_weights = [float(w) for w in self.class_weights]
            if any(not w > 0 for w in self.class_weights):
                raise ValueError("class weights must be positive")

    def to_json(self) -> dict:
        return asdict(self)

    def lr_at(self, epoch: int) -> float:
        lr = self.learning_rate * self.lr_gamma ** (epoch // self.lr_step)
        return float(f"{lr:.15g}")  # 0.001 * 0.1**2 lands on 1e-05, not 1.0000000000000002e-05


@dataclass
class _Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in PARAM_NAMES:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in PARAM_NAMES))
    if norm > max_norm:
        scale = max_norm / norm
        for k in PARAM_NAMES:
            grads[k] *= scale
    return norm


def train(model: RecurrentModel, ids: np.ndarray, lengths: np.ndarray, labels: np.ndarray,
          cfg: TrainingConfig) -> tuple[RecurrentModel, list[float]]:
    """Mini-batch training; returns the trained copy and the per-epoch mean loss."""
    model = model.copy()
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    weights = cfg.class_weights
    adam = _Adam() if cfg.optimizer == "adam" else None
    curve = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        total, count = 0.0, 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(model, ids[idx], lengths[idx], labels[idx], weights)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {b}")
            clip_gradients(grads, cfg.clip_norm)
            if adam is None:
                for k in PARAM_NAMES:
                    model.params[k] -= lr * grads[k]
            else:
                adam.step(model.params, grads, lr)
            total += loss * len(idx)
            count += len(idx)
        curve.append(total / count)
        logger.info("%s epoch %d/%d lr=%g loss=%.6f", model.kind, epoch + 1, cfg.epochs, lr, curve[-1])
    return model, curve


def predict_proba(model: RecurrentModel, ids: np.ndarray, lengths: np.ndarray, batch_size: int = 256) -> np.ndarray:
    out = []
    for start in range(0, len(lengths), batch_size):
        logits, _ = forward_batch(model, ids[start:start + batch_size], lengths[start:start + batch_size])
        out.append(softmax(logits))
    if not out:
        return np.zeros((0, model.n_classes))
    return np.concatenate(out)
