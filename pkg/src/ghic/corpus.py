"""Issue records, dump files, cleaning and single-label reduction."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .labels import LABELS, NUM_LABELS, is_default_label, label_index

DUMP_FIELDS = ("repo", "number", "title", "body", "state", "labels", "created_at")
STATES = ("open", "closed")


class CorpusError(ValueError):
    pass


def parse_timestamp(value: str) -> datetime:
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    ts = datetime.fromisoformat(value)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class IssueRecord:
    repo: str
    number: int
    title: str
    body: str | None
    state: str
    labels: frozenset[str]
    created_at: datetime

    @property
    def key(self) -> tuple[str, int]:
        return (self.repo, self.number)

    def to_json(self) -> dict:
        return {
            "repo": self.repo,
            "number": self.number,
            "title": self.title,
            "body": self.body,
            "state": self.state,
            "labels": sorted(self.labels),
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> IssueRecord:
        missing = [f for f in DUMP_FIELDS if f not in obj]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")
        repo = obj["repo"]
        if not isinstance(repo, str) or repo.count("/") != 1:
            raise ValueError(f"repo must be an owner/name slug, got {repo!r}")
        number = obj["number"]
        if isinstance(number, str) and number.isdigit():
            number = int(number)
        if not isinstance(number, int) or isinstance(number, bool) or number < 1:
            raise ValueError(f"number must be a positive integer, got {number!r}")
        title = obj["title"]
        if title is None:
            title = ""
        if not isinstance(title, str):
            raise ValueError("title must be text")
        body = obj["body"]
        if body is not None and not isinstance(body, str):
            raise ValueError("body must be text or null")
        state = obj["state"]
        if state not in STATES:
            raise ValueError(f"state must be open or closed, got {state!r}")
        labels = obj["labels"]
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ValueError("labels must be an array of strings")
        return cls(
            repo=repo,
            number=number,
            title=title,
            body=body,
            state=state,
            labels=frozenset(labels),
            created_at=parse_timestamp(obj["created_at"]),
        )


@dataclass(frozen=True)
class LabeledExample:
    repo: str
    number: int
    title: str
    body: str
    label: int

    def text(self, which: str) -> str:
        return select_field(self.title, self.body, which)

    def to_json(self) -> dict:
        return {
            "repo": self.repo,
            "number": self.number,
            "title": self.title,
            "body": self.body,
            "label": LABELS[self.label],
        }

    @classmethod
    def from_json(cls, obj: dict) -> LabeledExample:
        return cls(
            repo=obj["repo"],
            number=int(obj["number"]),
            title=obj.get("title") or "",
            body=obj["body"],
            label=label_index(obj["label"]),
        )


def select_field(title: str, body: str | None, which: str) -> str:
    body = body or ""
    if which == "title":
        return title
    if which == "body":
        return body
    if which == "both":
        return f"{title} {body}"
    raise ValueError(f"field must be title, body or both, got {which!r}")


@dataclass(frozen=True)
class LabelHistogram:
    counts: tuple[int, ...] = field(default=(0,) * NUM_LABELS)

    def __post_init__(self):
        if len(self.counts) != NUM_LABELS or any(c < 0 for c in self.counts):
            raise ValueError("histogram needs nine non-negative counts")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __getitem__(self, label: int) -> int:
        return self.counts[label]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(LABELS, self.counts))


def read_dump(path: str | os.PathLike) -> list[IssueRecord]:
    """Read a JSONL or CSV issue dump. Errors name the file and the 1-based row."""
    path = os.fspath(path)
    records = []
    if path.endswith(".csv"):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row_no, row in enumerate(reader, start=1):
                try:
                    obj = dict(row)
                    if obj.get("body") == "":
                        obj["body"] = None
                    labels = obj.get("labels")
                    obj["labels"] = json.loads(labels) if labels else []
                    records.append(IssueRecord.from_json(obj))
                except (ValueError, TypeError) as exc:
                    raise CorpusError(f"{path}: row {row_no}: {exc}") from exc
        return records
    with open(path, encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(IssueRecord.from_json(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise CorpusError(f"{path}: row {row_no}: {exc}") from exc
    return records


def write_dump(records: Iterable[IssueRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")


def merge_and_clean(sources: Sequence[str | os.PathLike]) -> list[IssueRecord]:
    """Concatenate dumps, drop records without a body, keep the last copy of each key.

    A surviving record sits at the position of its last occurrence.
    """
    if not sources:
        raise CorpusError("merge_and_clean needs at least one source")
    rows = [rec for src in sources for rec in read_dump(src)]
    rows = [rec for rec in rows if rec.body is not None and rec.body.strip()]
    last = {rec.key: i for i, rec in enumerate(rows)}
    return [rec for i, rec in enumerate(rows) if last[rec.key] == i]


def label_occurrences(records: Iterable[IssueRecord]) -> LabelHistogram:
    """Count every default-label occurrence, before single-label reduction."""
    counts = [0] * NUM_LABELS
    for rec in records:
        for name in rec.labels:
            if is_default_label(name):
                counts[label_index(name)] += 1
    return LabelHistogram(tuple(counts))


def select_single_label(record: IssueRecord, global_counts: LabelHistogram) -> LabeledExample | None:
    # rarest label first protects minority classes; alphabetical order = index order
    candidates = sorted(label_index(n) for n in record.labels if is_default_label(n))
    if not candidates:
        return None
    chosen = min(candidates, key=lambda c: (global_counts[c], c))
    return LabeledExample(
        repo=record.repo,
        number=record.number,
        title=record.title,
        body=record.body or "",
        label=chosen,
    )


def single_label_dataset(records: Sequence[IssueRecord]) -> list[LabeledExample]:
    counts = label_occurrences(records)
    out = []
    for rec in records:
        ex = select_single_label(rec, counts)
        if ex is not None:
            out.append(ex)
    return out


def label_histogram(examples: Iterable[LabeledExample]) -> LabelHistogram:
    counts = [0] * NUM_LABELS
    for ex in examples:
        counts[ex.label] += 1
    return LabelHistogram(tuple(counts))


def read_dataset(path: str | os.PathLike) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(LabeledExample.from_json(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise CorpusError(f"{path}: row {row_no}: {exc}") from exc
    return out


def write_dataset(examples: Iterable[LabeledExample], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")
