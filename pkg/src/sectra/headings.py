"""Heading canonicalization and the heading -> structural label map."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .labels import SectionLabel

# Category tokens accepted in mapping files. Objective is folded into Background.
CATEGORIES = {
    "background": SectionLabel.BACKGROUND,
    "objective": SectionLabel.BACKGROUND,
    "method": SectionLabel.METHOD,
    "result": SectionLabel.RESULT,
    "conclusion": SectionLabel.CONCLUSION,
}

_ROMAN = r"(?=[mdclxvi])m{0,3}(?:cm|cd|d?c{0,3})(?:xc|xl|l?x{0,3})(?:ix|iv|v?i{0,3})"
# A leading enumeration token: "3", "3.1.", "2)", "IV.", "b)", "A:".
_ENUM_PUNCT = re.compile(
    rf"^(?:\d+(?:\.\d+)*[.):]*|{_ROMAN}[.):]+|[a-z][.):]+)(?:\s+|$)", re.IGNORECASE
)
# Upper-case roman numerals may appear bare ("IV Results"); lower-case ones may not
# ("mix", "dim" are words).
_ENUM_BARE_ROMAN = re.compile(rf"^{_ROMAN.upper()}\s+")
_PUNCT = re.compile(r"[^\w\s]|_")
_SPACE = re.compile(r"\s+")


def _strip_enumeration(text: str) -> str:
    while True:
        text = text.lstrip()
        text = text.lstrip("([{").lstrip()
        m = _ENUM_PUNCT.match(text) or _ENUM_BARE_ROMAN.match(text)
        if not m or m.end() == 0:
            return text
        text = text[m.end():]


def _one_pass(raw: str) -> str:
    text = _strip_enumeration(raw)
    text = text.lower()
    text = _PUNCT.sub(" ", text)
    return _SPACE.sub(" ", text).strip()


def canonicalize_heading(raw: str) -> str:
    """Normalize a raw section title for map lookup.

    Lowercases, drops leading enumeration ("3.", "IV)", "b:"), replaces
    punctuation with spaces and collapses whitespace. Iterates to a fixed
    point, so the function is idempotent by construction.
    """
    current = raw
    while True:
        nxt = _one_pass(current)
        if nxt == current:
            return nxt
        current = nxt


class HeadingMapError(ValueError):
    pass


@dataclass(frozen=True)
class HeadingMap:
    entries: Mapping[str, SectionLabel]
    provenance: str = "<memory>"

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def lookup(self, raw_heading: str) -> SectionLabel:
        return map_heading(canonicalize_heading(raw_heading), self)


def map_heading(canonical: str, heading_map: HeadingMap) -> SectionLabel:
    return heading_map.entries.get(canonical, SectionLabel.UNMAPPED)


def parse_heading_rows(rows, provenance: str = "<memory>") -> HeadingMap:
    """Build a map from ``(raw_heading, category)`` pairs.

    Raises HeadingMapError listing every unknown category and every
    canonical key that received two different labels. The error text is
    sorted so that row order never changes the outcome.
    """
    seen: dict[str, set[SectionLabel]] = {}
    problems: set[str] = set()
    for raw, category in rows:
        label = CATEGORIES.get(category.strip().lower())
        if label is None:
            problems.add(f"unknown category {category.strip()!r} for heading {raw.strip()!r}")
            continue
        key = canonicalize_heading(raw)
        if not key:
            problems.add(f"heading {raw!r} is empty after canonicalization")
            continue
        seen.setdefault(key, set()).add(label)
    for key, labels in seen.items():
        if len(labels) > 1:
            names = ", ".join(sorted(lab.value for lab in labels))
            problems.add(f"conflicting labels for {key!r}: {names}")
    if problems:
        raise HeadingMapError("; ".join(sorted(problems)))
    entries = {key: next(iter(labels)) for key, labels in sorted(seen.items())}
    return HeadingMap(entries, provenance)


def _read_rows(lines, source: str):
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise HeadingMapError(f"{source}:{lineno}: expected 'heading<TAB>category', got {line!r}")
        yield parts[0], parts[1]


def load_heading_map(path: str | Path | None = None) -> HeadingMap:
    """Load a tab-separated heading map; ``None`` loads the bundled seed map."""
    if path is None:
        text = resources.files("sectra").joinpath("data/heading_map.tsv").read_text("utf-8")
        return parse_heading_rows(_read_rows(text.splitlines(), "seed"), "sectra:data/heading_map.tsv")
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        rows = list(_read_rows(f, str(path)))
    return parse_heading_rows(rows, str(path))
