"""The nine default GitHub issue labels and their canonical indices."""

LABELS = (
    "bug",
    "documentation",
    "duplicate",
    "enhancement",
    "good first issue",
    "help wanted",
    "invalid",
    "question",
    "wontfix",
)
NUM_LABELS = len(LABELS)

_INDEX = {name: i for i, name in enumerate(LABELS)}


def label_index(name: str) -> int:
    """Map a label name to its index; raises KeyError for non-default labels."""
    try:
        return _INDEX[name]
    except KeyError:
        raise KeyError(f"not a default GitHub label: {name!r}") from None


def label_name(index: int) -> str:
    if not 0 <= index < NUM_LABELS:
        raise ValueError(f"label index out of range: {index}")
    return LABELS[index]


def is_default_label(name: str) -> bool:
    return name in _INDEX
