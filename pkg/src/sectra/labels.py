"""Structural function labels shared by every stage."""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping


class SectionLabel(enum.Enum):
    BACKGROUND = "Background"
    METHOD = "Method"
    RESULT = "Result"
    CONCLUSION = "Conclusion"
    UNMAPPED = "Unmapped"

    @property
    def index(self) -> int:
        """Position in canonical order; Unmapped sorts last."""
        return _ORDER[self]

    @classmethod
    def parse(cls, value: str | SectionLabel) -> SectionLabel:
        if isinstance(value, SectionLabel):
            return value
        key = value.strip().lower()
        for label in cls:
            if label.value.lower() == key or label.name.lower() == key:
                return label
        raise ValueError(f"unknown section label: {value!r}")

    def __lt__(self, other: SectionLabel) -> bool:
        if not isinstance(other, SectionLabel):
            return NotImplemented
        return self.index < other.index


# The four terminal labels, in canonical order.
LABELS: tuple[SectionLabel, ...] = (
    SectionLabel.BACKGROUND,
    SectionLabel.METHOD,
    SectionLabel.RESULT,
    SectionLabel.CONCLUSION,
)

_ORDER = {label: i for i, label in enumerate(LABELS)}
_ORDER[SectionLabel.UNMAPPED] = len(LABELS)


def canonical_sorted(labels) -> list[SectionLabel]:
    return sorted(set(labels), key=lambda lab: lab.index)


class SectionWeights(Mapping):
    """Per-label importance weights; must be non-negative and sum to 1."""

    def __init__(self, background: float = 0.30, method: float = 0.25,
                 result: float = 0.30, conclusion: float = 0.15):
        values = (background, method, result, conclusion)
        if any(not math.isfinite(w) or w < 0 for w in values):
            raise ValueError(f"weights must be finite and non-negative: {values}")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(values)!r}")
        self._w = dict(zip(LABELS, (float(v) for v in values)))

    @classmethod
    def from_dict(cls, d: Mapping) -> SectionWeights:
        parsed = {SectionLabel.parse(k): float(v) for k, v in d.items()}
        unknown = set(parsed) - set(LABELS)
        if unknown:
            raise ValueError(f"weights given for non-terminal labels: {unknown}")
        return cls(*(parsed.get(lab, 0.0) for lab in LABELS))

    def __getitem__(self, label: SectionLabel) -> float:
        return self._w[label]

    def __iter__(self):
        return iter(LABELS)

    def __len__(self) -> int:
        return len(LABELS)

    def as_dict(self) -> dict[str, float]:
        return {lab.value: w for lab, w in self._w.items()}

    def __repr__(self) -> str:
        return f"SectionWeights({self.as_dict()})"
