"""Deterministic cleaning of issue text into stemmed tokens."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from html.parser import HTMLParser
from importlib import resources

from . import porter

_FENCE = re.compile(r"```.*?(?:```|\Z)", re.DOTALL)
_URL = re.compile(r"(?:[a-z][a-z0-9+.\-]*://|www\.)\S*")
_NON_ALPHA = re.compile(r"[^a-z]+")

_DROP_CONTENT = frozenset({"script", "style"})
_BLOCK = frozenset({
    "address", "article", "aside", "blockquote", "br", "dd", "details", "div", "dl",
    "dt", "figcaption", "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "li", "main", "nav", "ol", "p", "pre", "section", "summary",
    "table", "td", "th", "tr", "ul",
})


def _load_stopwords() -> tuple[str, frozenset[str]]:
    text = resources.files("ghic").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    lines = text.splitlines()
    version = lines[0].lstrip("# ").strip()
    return version, frozenset(w.strip() for w in lines[1:] if w.strip())


STOPWORDS_VERSION, STOPWORDS = _load_stopwords()


@dataclass(frozen=True)
class PipelineConfig:
    stopwords: frozenset[str] = field(default=STOPWORDS, repr=False)
    stopwords_version: str = STOPWORDS_VERSION
    stemmer: str = "porter"
    keep_code_blocks: bool = False

    def __post_init__(self):
        if self.stemmer not in ("porter", "none"):
            raise ValueError(f"stemmer must be porter or none, got {self.stemmer!r}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def to_json(self) -> dict:
        return {
            "stopwords_version": self.stopwords_version,
            "stemmer": self.stemmer,
            "keep_code_blocks": self.keep_code_blocks,
        }


DEFAULT_CONFIG = PipelineConfig()


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0
        self._pending_break = False

    def _break(self):
        if self.parts:
            self._pending_break = True

    def handle_starttag(self, tag, attrs):
        if tag in _DROP_CONTENT:
            self._skip_depth += 1
        elif tag in _BLOCK:
            self._break()

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK:
            self._break()

    def handle_endtag(self, tag):
        if tag in _DROP_CONTENT:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in _BLOCK:
            self._break()

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._pending_break:
            if not self.parts[-1][-1:].isspace() and not data[:1].isspace():
                self.parts.append("\n")
            self._pending_break = False
        self.parts.append(data)


def strip_markup(raw: str, keep_code_blocks: bool = False) -> str:
    """Drop tags (and script/style bodies), decode entities, drop ``` fences."""
    if not keep_code_blocks:
        raw = _FENCE.sub(" ", raw)
    if "<" not in raw and "&" not in raw:
        return raw
    parser = _TextExtractor()
    parser.feed(raw)
    leftover = parser.rawdata  # an unterminated "<..." at the end is text, not a tag
    parser.close()
    if leftover and not parser._skip_depth:
        parser.handle_data(leftover)
    return "".join(parser.parts)


def normalize(clean: str) -> str:
    text = _URL.sub(" ", clean.lower())
    return _NON_ALPHA.sub(" ", text).strip()


@lru_cache(maxsize=200_000)
def stem_to_fixpoint(word: str) -> str:
    # one Porter pass is not always idempotent ("agreed" -> "agre" -> "agr")
    while True:
        nxt = porter.stem(word)
        if nxt == word:
            return word
        word = nxt


def tokenize_stem_filter(normal: str, cfg: PipelineConfig = DEFAULT_CONFIG) -> list[str]:
    tokens = []
    for tok in normal.split(" "):
        if len(tok) < 2 or tok in cfg.stopwords:
            continue
        if cfg.stemmer == "porter":
            tok = stem_to_fixpoint(tok)
            if len(tok) < 2 or tok in cfg.stopwords:
                continue
        tokens.append(tok)
    return tokens


def preprocess(raw: str, cfg: PipelineConfig = DEFAULT_CONFIG) -> list[str]:
    return tokenize_stem_filter(normalize(strip_markup(raw, cfg.keep_code_blocks)), cfg)
