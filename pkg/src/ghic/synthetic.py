"""Seeded synthetic issue corpora with known, separable label structure."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np

from .corpus import IssueRecord
from .labels import LABELS, NUM_LABELS
from .textprep import STOPWORDS, stem_to_fixpoint

_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "pl", "st", "tr")
_NUCLEI = ("a", "e", "i", "o", "u")
_CODAS = ("k", "m", "n", "p", "t", "x", "rk", "nd", "mp", "lt")

_BASE_TIME = datetime(2023, 1, 1, tzinfo=timezone.utc)


def pseudo_words(n: int, rng: np.random.Generator) -> list[str]:
    """Distinct pronounceable words that survive preprocessing unchanged."""
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        syllables = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _NUCLEI[rng.integers(len(_NUCLEI))] for _ in range(syllables))
        w += _CODAS[rng.integers(len(_CODAS))]
        if w in seen or w in STOPWORDS or stem_to_fixpoint(w) != w:
            continue
        seen.add(w)
        words.append(w)
    return words


def skewed_counts(n_max: int, ratio: float, n_classes: int = NUM_LABELS) -> list[int]:
    """Class sizes decaying geometrically from ``n_max`` to ``n_max / ratio``."""
    exps = np.linspace(0.0, 1.0, n_classes)
    return [max(1, int(round(n_max * ratio ** -e))) for e in exps]


def separable_corpus(
    per_class: int | Sequence[int] = 300,
    seed: int = 0,
    pool_size: int = 50,
    noise_pool_size: int = 100,
    noise_fraction: float = 0.2,
    min_tokens: int = 10,
    max_tokens: int = 30,
    repo: str = "synthetic/issues",
) -> list[IssueRecord]:
    """Issues whose bodies draw 10-30 tokens from a per-label keyword pool.

    Each token is a shared noise word with probability ``noise_fraction``.
    Keyword pools are disjoint across labels. Records come out interleaved
    across labels and carry exactly one default label.
    """
    rng = np.random.default_rng(seed)
    counts = [per_class] * NUM_LABELS if isinstance(per_class, int) else list(per_class)
    if len(counts) != NUM_LABELS:
        raise ValueError("need one count per label")
    words = pseudo_words(NUM_LABELS * pool_size + noise_pool_size, rng)
    pools = [words[c * pool_size:(c + 1) * pool_size] for c in range(NUM_LABELS)]
    noise = words[NUM_LABELS * pool_size:]

    def draw(pool, k):
        out = []
        for _ in range(k):
            src = noise if rng.random() < noise_fraction else pool
            out.append(src[rng.integers(len(src))])
        return out

    labels = np.concatenate([np.full(n, c) for c, n in enumerate(counts)])
    labels = labels[rng.permutation(len(labels))]
    records = []
    for i, c in enumerate(labels.tolist(), start=1):
        title = " ".join(draw(pools[c], int(rng.integers(3, 7)))).capitalize()
        body_words = draw(pools[c], int(rng.integers(min_tokens, max_tokens + 1)))
        cut = len(body_words) // 2
        body = f"<p>{' '.join(body_words[:cut])}</p>\n\n{' '.join(body_words[cut:])}"
        records.append(IssueRecord(
            repo=repo,
            number=i,
            title=title,
            body=body,
            state="closed" if i % 3 == 0 else "open",
            labels=frozenset({LABELS[c]}),
            created_at=_BASE_TIME + timedelta(minutes=i),
        ))
    return records
