"""Single-file ``.ghic`` model bundles.

Layout (all integers little-endian)::

    b"GHIC" | u16 format_version | u8 len + model_kind | u32 section count
    section*: u8 len + name | u8 type (b"J" json, b"A" array) | u64 len + payload
    sha256 of every byte after the header (32 bytes)

Array payloads are ``u8 dtype (0=<f8, 1=<i8) | u8 ndim | u64 shape... | data``.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from dataclasses import field as dc_field
from typing import Any

import numpy as np

from .features import TfIdfModel, Vocabulary
from .forest import RandomForestModel, Tree
from .labels import LABELS
from .naive_bayes import NaiveBayesModel
from .recurrent import PARAM_NAMES, RecurrentModel
from .textprep import PipelineConfig

MAGIC = b"GHIC"
FORMAT_VERSION = 1
MODEL_KINDS = ("naive_bayes", "random_forest", "rnn", "lstm", "gru")
RECURRENT_KIND = {"rnn": "simple", "lstm": "lstm", "gru": "gru"}
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
_DIGEST = 32


class BundleError(ValueError):
    pass


class BadMagicError(BundleError):
    pass


class UnsupportedVersionError(BundleError):
    def __init__(self, found: int, supported: int = FORMAT_VERSION):
        self.found = found
        self.supported = supported
        super().__init__(f"bundle format version {found} is not supported (this build reads version {supported})")


class ChecksumError(BundleError):
    pass


class TruncatedBundleError(BundleError):
    pass


@dataclass
class ModelBundle:
    model_kind: str
    pipeline: PipelineConfig
    features: TfIdfModel | Vocabulary
    model: Any
    field: str = "body"
    training: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")

    @property
    def is_recurrent(self) -> bool:
        return self.model_kind in RECURRENT_KIND


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf-8")


def _array_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype.kind == "f":
        code, dt = 0, _DTYPES[0]
    elif arr.dtype.kind in "iub":
        code, dt = 1, _DTYPES[1]
    else:
        raise TypeError(f"cannot store array of dtype {arr.dtype}")
    head = struct.pack("<BB", code, arr.ndim) + b"".join(struct.pack("<Q", s) for s in arr.shape)
    return head + np.ascontiguousarray(arr, dtype=dt).tobytes()


def _sections(bundle: ModelBundle) -> list[tuple[str, bytes, bytes]]:
    meta = {
        "model_kind": bundle.model_kind,
        "field": bundle.field,
        "labels": list(LABELS),
        "pipeline": bundle.pipeline.to_json(),
        "training": bundle.training,
    }
    out = []
    feats = bundle.features
    vocab = feats.vocab if isinstance(feats, TfIdfModel) else feats
    meta["vocab"] = {"max_size": vocab.max_size, "mode": vocab.mode}
    if isinstance(feats, TfIdfModel):
        meta["tfidf"] = {"corpus_size": feats.corpus_size}
    model = bundle.model
    if isinstance(model, NaiveBayesModel):
        meta["naive_bayes"] = {"alpha": model.alpha}
    elif isinstance(model, RandomForestModel):
        meta["random_forest"] = {
            "n_features": model.n_features,
            "features_per_split": model.features_per_split,
            "seed": model.seed,
            "bootstrap": model.bootstrap,
        }
    out.append(("meta", b"J", _json_bytes(meta)))
    out.append(("stopwords", b"J", _json_bytes(sorted(bundle.pipeline.stopwords))))
    out.append(("vocab.terms", b"J", _json_bytes(list(vocab.terms))))
    out.append(("vocab.doc_freq", b"A", _array_bytes(np.array(vocab.doc_freq, dtype=np.int64))))
    if isinstance(feats, TfIdfModel):
        out.append(("tfidf.idf", b"A", _array_bytes(feats.idf)))
    if isinstance(model, NaiveBayesModel):
        out.append(("nb.log_priors", b"A", _array_bytes(model.log_priors)))
        out.append(("nb.log_likelihood", b"A", _array_bytes(model.log_likelihood)))
    elif isinstance(model, RandomForestModel):
        sizes = [t.n_nodes for t in model.trees]
        out.append(("rf.offsets", b"A", _array_bytes(np.cumsum([0, *sizes]))))
        for attr in ("feature", "threshold", "left", "right", "class_counts"):
            out.append((f"rf.{attr}", b"A", _array_bytes(np.concatenate([getattr(t, attr) for t in model.trees]))))
    elif isinstance(model, RecurrentModel):
        for name in PARAM_NAMES:
            out.append((f"rnn.{name}", b"A", _array_bytes(model.params[name])))
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return out


def dumps(bundle: ModelBundle) -> bytes:
    kind = bundle.model_kind.encode("ascii")
    sections = _sections(bundle)
    header = MAGIC + struct.pack("<HB", FORMAT_VERSION, len(kind)) + kind + struct.pack("<I", len(sections))
    body = b"".join(
        struct.pack("<B", len(name)) + name.encode("ascii") + typ + struct.pack("<Q", len(payload)) + payload
        for name, typ, payload in sections
    )
    return header + body + hashlib.sha256(body).digest()


def save(bundle: ModelBundle, path: str | os.PathLike) -> None:
    data = dumps(bundle)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedBundleError(f"bundle truncated while reading {what} at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _parse_array(payload: bytes, name: str) -> np.ndarray:
    r = _Reader(payload)
    code, ndim = r.unpack("<BB", f"{name} array header")
    if code not in _DTYPES:
        raise BundleError(f"section {name}: unknown dtype code {code}")
    shape = tuple(r.unpack("<Q", f"{name} shape")[0] for _ in range(ndim))
    dt = _DTYPES[code]
    count = int(np.prod(shape)) if shape else 1
    raw = r.take(count * dt.itemsize, f"{name} data")
    return np.frombuffer(raw, dtype=dt).reshape(shape).astype(dt.newbyteorder("="))


def loads(data: bytes) -> ModelBundle:
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data):
            raise TruncatedBundleError("bundle truncated inside the magic bytes")
        raise BadMagicError("not a .ghic bundle (bad magic bytes)")
    if data[:4] != MAGIC:
        raise BadMagicError("not a .ghic bundle (bad magic bytes)")
    r = _Reader(data, 4)
    (version,) = r.unpack("<H", "format version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(version)
    (kind_len,) = r.unpack("<B", "model kind")
    kind = r.take(kind_len, "model kind").decode("ascii", errors="replace")
    (n_sections,) = r.unpack("<I", "section count")
    body_start = r.pos
    raw_sections = {}
    for _ in range(n_sections):
        (name_len,) = r.unpack("<B", "section name")
        name = r.take(name_len, "section name").decode("ascii", errors="replace")
        typ = r.take(1, f"section {name} type")
        (length,) = r.unpack("<Q", f"section {name} length")
        raw_sections[name] = (typ, r.take(length, f"section {name} payload"))
    body_end = r.pos
    digest = r.take(_DIGEST, "checksum")
    if r.pos != len(data):
        raise BundleError(f"{len(data) - r.pos} unexpected trailing bytes after the checksum")
    if hashlib.sha256(data[body_start:body_end]).digest() != digest:
        raise ChecksumError("bundle checksum mismatch: file is corrupted")

    sections = {}
    for name, (typ, payload) in raw_sections.items():
        if typ == b"J":
            sections[name] = json.loads(payload.decode("utf-8"))
        elif typ == b"A":
            sections[name] = _parse_array(payload, name)
        else:
            raise BundleError(f"section {name}: unknown type {typ!r}")
    try:
        return _build(kind, sections)
    except KeyError as exc:
        raise BundleError(f"bundle is missing section or field {exc}") from None


def _build(kind: str, s: dict) -> ModelBundle:
    meta = s["meta"]
    if meta["model_kind"] != kind:
        raise BundleError("model kind in header and metadata disagree")
    if kind not in MODEL_KINDS:
        raise BundleError(f"unknown model kind {kind!r}")
    if tuple(meta["labels"]) != LABELS:
        raise BundleError("bundle was trained on a different label set")
    pcfg = meta["pipeline"]
    pipeline = PipelineConfig(
        stopwords=frozenset(s["stopwords"]),
        stopwords_version=pcfg["stopwords_version"],
        stemmer=pcfg["stemmer"],
        keep_code_blocks=pcfg["keep_code_blocks"],
    )
    vocab = Vocabulary(
        tuple(s["vocab.terms"]),
        tuple(int(x) for x in s["vocab.doc_freq"]),
        int(meta["vocab"]["max_size"]),
        meta["vocab"]["mode"],
    )
    if "tfidf.idf" in s:
        features = TfIdfModel(vocab, s["tfidf.idf"], int(meta["tfidf"]["corpus_size"]))
    else:
        features = vocab
    if kind == "naive_bayes":
        model = NaiveBayesModel(s["nb.log_priors"], s["nb.log_likelihood"], float(meta["naive_bayes"]["alpha"]))
    elif kind == "random_forest":
        rf = meta["random_forest"]
        offsets = s["rf.offsets"]
        trees = tuple(
            Tree(*(s[f"rf.{a}"][lo:hi] for a in ("feature", "threshold", "left", "right", "class_counts")))
            for lo, hi in zip(offsets[:-1].tolist(), offsets[1:].tolist())
        )
        model = RandomForestModel(trees, int(rf["n_features"]), int(rf["features_per_split"]), int(rf["seed"]), bool(rf["bootstrap"]))
    else:
        model = RecurrentModel(RECURRENT_KIND[kind], {n: s[f"rnn.{n}"] for n in PARAM_NAMES})
    return ModelBundle(kind, pipeline, features, model, meta["field"], meta["training"])


def load(path: str | os.PathLike) -> ModelBundle:
    with open(path, "rb") as fh:
        return loads(fh.read())
