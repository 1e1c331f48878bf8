"""Budgeted, section-guided summary generation.

A generator is any callable ``(sentences, max_words) -> text``. The
extractive fallback below is deterministic and needs no network; remote
models plug in through ``sectra.backends.RemoteGenerator``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .labels import LABELS, SectionLabel, SectionWeights
from .text import count_words, truncate_words

Generator = Callable[[Sequence[str], int], str]

MODES = ("divide_and_conquer", "full_document", "extractive_fallback")


class SummarizationError(RuntimeError):
    def __init__(self, message: str, label: SectionLabel | None = None):
        super().__init__(message)
        self.label = label


@dataclass(frozen=True)
class SummaryPlan:
    labels: tuple[SectionLabel, ...]
    budgets: Mapping[SectionLabel, int]
    total_cap: int = 300

    def as_dict(self) -> dict:
        return {"budgets": {lab.value: self.budgets[lab] for lab in self.labels},
                "total_cap": self.total_cap}


def plan(present: Iterable[SectionLabel], weights: SectionWeights = SectionWeights(),
         cap: int = 300) -> SummaryPlan:
    """Split a word cap across the present labels in proportion to their weights.

    Each label gets floor(cap * w / sum of present weights); words lost to
    flooring go to the earliest present label.
    """
    labels = tuple(lab for lab in LABELS if lab in set(present))
    if not labels:
        raise ValueError("no labels to plan for")
    if cap <= 0:
        raise ValueError("cap must be positive")
    # weights go through their decimal repr so 0.3 is treated as 3/10, not its binary neighbour
    exact = {lab: Fraction(repr(weights[lab])) for lab in labels}
    total = sum(exact.values())
    if total == 0:
        exact = {lab: Fraction(1) for lab in labels}
        total = Fraction(len(labels))
    budgets = {lab: math.floor(cap * exact[lab] / total) for lab in labels}
    budgets[labels[0]] += cap - sum(budgets.values())
    return SummaryPlan(labels, budgets, cap)


def extractive_fallback(sentences: Sequence[str], budget: int) -> str:
    """Leading sentences that fit the budget; a too-long first sentence is cut."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    if not sentences:
        return ""
    out: list[str] = []
    used = 0
    for sent in sentences:
        n = count_words(sent)
        if used + n > budget:
            break
        out.append(sent.strip())
        used += n
    if not out:
        return truncate_words(sentences[0], budget)
    return " ".join(out)


extractive_fallback.name = "extractive"


@dataclass(frozen=True)
class SectionSummary:
    label: SectionLabel
    text: str

    @property
    def words(self) -> int:
        return count_words(self.text)


@dataclass(frozen=True)
class GeneratedSummary:
    article_id: str
    mode: str
    sections: tuple[SectionSummary, ...]
    text: str
    total_cap: int

    @property
    def total_words(self) -> int:
        return count_words(self.text)

    def as_dict(self) -> dict:
        return {
            "article_id": self.article_id,
            "mode": self.mode,
            "sections": [{"label": s.label.value, "text": s.text, "words": s.words}
                         for s in self.sections],
            "text": self.text,
            "total_words": self.total_words,
        }


def group_sections(sections: Iterable[tuple[SectionLabel, Sequence[str]]]) -> dict[SectionLabel, list[str]]:
    """Concatenate sentences of same-label sections in document order; drops Unmapped."""
    grouped: dict[SectionLabel, list[str]] = {}
    for label, sents in sections:
        if label in LABELS:
            grouped.setdefault(label, []).extend(sents)
    return grouped


def _is_extractive(generator) -> bool:
    return getattr(generator, "name", None) == "extractive"


def summarize_divide(
    sections: Sequence[tuple[SectionLabel, Sequence[str]]],
    generator: Generator = extractive_fallback,
    summary_plan: SummaryPlan | None = None,
    article_id: str = "",
    jobs: int = 1,
) -> GeneratedSummary:
    """One generation call per planned label, truncated to its budget, joined in label order."""
    grouped = group_sections(sections)
    if summary_plan is None:
        summary_plan = plan(grouped)
    missing = [lab.value for lab in summary_plan.labels if not grouped.get(lab)]
    if missing:
        raise SummarizationError(f"{article_id}: no sections for planned labels {missing}")

    def run(label: SectionLabel) -> SectionSummary:
        budget = summary_plan.budgets[label]
        if budget <= 0:
            return SectionSummary(label, "")
        try:
            text = generator(grouped[label], budget)
        except Exception as exc:
            raise SummarizationError(
                f"{article_id}: generation failed for {label.value}: {exc}", label
            ) from exc
        return SectionSummary(label, truncate_words(text, budget))

    if jobs > 1 and len(summary_plan.labels) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, summary_plan.labels))
    else:
        parts = [run(lab) for lab in summary_plan.labels]
    text = " ".join(p.text for p in parts if p.text)
    mode = "extractive_fallback" if _is_extractive(generator) else "divide_and_conquer"
    return GeneratedSummary(article_id, mode, tuple(parts), text, summary_plan.total_cap)


def marked_input(sections: Sequence[tuple[SectionLabel, Sequence[str]]]) -> str:
    """Full-document input: ``[LABEL]`` marker lines, each followed by that label's text."""
    grouped = group_sections(sections)
    lines = []
    for label in LABELS:
        if label in grouped:
            lines.append(f"[{label.value.upper()}]")
            lines.append(" ".join(s.strip() for s in grouped[label]))
    return "\n".join(lines)


def summarize_full(
    sections: Sequence[tuple[SectionLabel, Sequence[str]]],
    generator: Generator,
    summary_plan: SummaryPlan | None = None,
    article_id: str = "",
) -> GeneratedSummary:
    """Single generation call over the marked-up document, truncated to the total cap."""
    cap = summary_plan.total_cap if summary_plan else 300
    source = marked_input(sections)
    if not source:
        raise SummarizationError(f"{article_id}: nothing to summarize")
    try:
        out = generator([source], cap)
    except Exception as exc:
        raise SummarizationError(f"{article_id}: generation failed: {exc}") from exc
    text = truncate_words(out, cap)
    return GeneratedSummary(article_id, "full_document", (), text, cap)
