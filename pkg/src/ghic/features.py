"""Vocabularies, TF-IDF vectors and fixed-length token-id sequences."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

PAD = 0
UNK = 1
RESERVED = 2


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]  # in index order, excluding reserved slots
    doc_freq: tuple[int, ...]
    max_size: int
    mode: str = "bag"

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i + self.offset for i, t in enumerate(self.terms)})

    @property
    def offset(self) -> int:
        return RESERVED if self.mode == "sequence" else 0

    @property
    def size(self) -> int:
        """Number of index slots, reserved ones included."""
        return len(self.terms) + self.offset

    @property
    def term_to_index(self) -> dict[str, int]:
        return dict(self._index)

    def index(self, term: str) -> int | None:
        return self._index.get(term)

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def __len__(self) -> int:
        return len(self.terms)


def build_vocabulary(corpus: Sequence[Sequence[str]], max_size: int | None = None, mode: str = "bag") -> Vocabulary:
    """Rank terms by total frequency (ties alphabetical) and keep the top ``max_size``.

    ``max_size=None`` keeps every term. In sequence mode the two reserved
    slots (PAD, UNK) count towards ``max_size``.
    """
    if mode not in ("bag", "sequence"):
        raise ValueError(f"mode must be bag or sequence, got {mode!r}")
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    reserved = RESERVED if mode == "sequence" else 0
    if max_size is not None and max_size < reserved + 1:
        raise ValueError(f"max_size must be at least {reserved + 1} in {mode} mode")
    freq: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for doc in corpus:
        freq.update(doc)
        df.update(set(doc))
    ranked = sorted(freq, key=lambda t: (-freq[t], t))
    if max_size is not None:
        ranked = ranked[: max_size - reserved]
    cap = max_size if max_size is not None else len(ranked) + reserved
    return Vocabulary(tuple(ranked), tuple(df[t] for t in ranked), cap, mode)


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray  # sorted, int64
    values: np.ndarray   # float64, strictly positive

    def __len__(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict[int, float]:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    @classmethod
    def from_dict(cls, entries: dict[int, float]) -> SparseVector:
        items = sorted((int(k), float(v)) for k, v in entries.items() if v != 0)
        return cls(
            np.array([k for k, _ in items], dtype=np.int64),
            np.array([v for _, v in items], dtype=np.float64),
        )

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))


@dataclass(frozen=True)
class TfIdfModel:
    vocab: Vocabulary
    idf: np.ndarray
    corpus_size: int

    @property
    def n_features(self) -> int:
        return self.vocab.size


def smoothed_idf(n_docs: int, doc_freq: int) -> float:
    return math.log((1 + n_docs) / (1 + doc_freq)) + 1.0


def tfidf_fit(corpus: Sequence[Sequence[str]], max_size: int | None = None) -> TfIdfModel:
    if not corpus:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    vocab = build_vocabulary(corpus, max_size, mode="bag")
    n = len(corpus)
    idf = np.array([smoothed_idf(n, d) for d in vocab.doc_freq], dtype=np.float64)
    return TfIdfModel(vocab, idf, n)


def tfidf_transform(model: TfIdfModel, doc: Sequence[str]) -> SparseVector:
    counts: Counter[int] = Counter()
    for tok in doc:
        idx = model.vocab.index(tok)
        if idx is not None:
            counts[idx] += 1
    if not counts:
        return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64))
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices.tolist()], dtype=np.float64) * model.idf[indices]
    values /= np.sqrt(np.sum(values**2))
    return SparseVector(indices, values)


def to_matrix(vectors: Sequence[SparseVector], n_features: int) -> sp.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v)
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))


def tfidf_matrix(model: TfIdfModel, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
    return to_matrix([tfidf_transform(model, d) for d in docs], model.n_features)


@dataclass(frozen=True)
class TokenIdSequence:
    ids: np.ndarray
    true_length: int


def encode_sequence(vocab: Vocabulary, doc: Sequence[str], max_len: int) -> TokenIdSequence:
    if vocab.mode != "sequence":
        raise ValueError("encode_sequence needs a sequence-mode vocabulary")
    if max_len < 1:
        raise ValueError("max_len must be positive")
    kept = doc[:max_len]
    ids = np.full(max_len, PAD, dtype=np.int64)
    for pos, tok in enumerate(kept):
        idx = vocab.index(tok)
        ids[pos] = UNK if idx is None else idx
    return TokenIdSequence(ids, len(kept))


def encode_batch(vocab: Vocabulary, docs: Sequence[Sequence[str]], max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack encoded sequences into an (N, max_len) id matrix and a length vector."""
    ids = np.full((len(docs), max_len), PAD, dtype=np.int64)
    lengths = np.zeros(len(docs), dtype=np.int64)
    for i, doc in enumerate(docs):
        seq = encode_sequence(vocab, doc, max_len)
        ids[i] = seq.ids
        lengths[i] = seq.true_length
    return ids, lengths


def decode_sequence(vocab: Vocabulary, seq: TokenIdSequence) -> list[str]:
    """In-vocabulary tokens of ``seq``, in order (PAD and UNK skipped)."""
    return [vocab.terms[i - vocab.offset] for i in seq.ids[: seq.true_length].tolist() if i >= RESERVED]
