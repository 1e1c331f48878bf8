"""Corpus ingestion, filtering, statistics and positional analysis.

Input is the arXiv/PubMed summarization JSONL layout: one object per line
with ``article_id``, ``abstract_text``, ``section_names`` and ``sections``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .labels import LABELS, SectionLabel
from .metrics import Embedder, TfidfEmbedder, cosine
from .text import count_sentence_words, count_words

log = logging.getLogger(__name__)

SCHEMA_KEYS = ("article_id", "abstract_text", "section_names", "sections")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class PaperRecord:
    article_id: str
    abstract_sentences: tuple[str, ...]
    section_names: tuple[str, ...]
    sections: tuple[tuple[str, ...], ...]
    # keys outside the schema, carried through untouched
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not isinstance(self.article_id, str) or not self.article_id.strip():
            raise SchemaError("article_id must be a non-empty string")
        if len(self.section_names) != len(self.sections):
            raise SchemaError(
                f"{len(self.section_names)} section names but {len(self.sections)} sections"
            )
        for where, sents in [("abstract", self.abstract_sentences)] + [
            (f"section {i}", s) for i, s in enumerate(self.sections)
        ]:
            for s in sents:
                if not isinstance(s, str) or not s.strip():
                    raise SchemaError(f"empty or non-string sentence in {where}")

    @classmethod
    def from_dict(cls, obj: Any) -> PaperRecord:
        if not isinstance(obj, dict):
            raise SchemaError("line is not a JSON object")
        missing = [k for k in SCHEMA_KEYS if k not in obj]
        if missing:
            raise SchemaError(f"missing keys: {', '.join(missing)}")
        abstract, names, sections = obj["abstract_text"], obj["section_names"], obj["sections"]
        if not _is_str_list(abstract):
            raise SchemaError("abstract_text must be a list of strings")
        if not _is_str_list(names):
            raise SchemaError("section_names must be a list of strings")
        if not isinstance(sections, list) or not all(_is_str_list(s) for s in sections):
            raise SchemaError("sections must be a list of lists of strings")
        extra = {k: v for k, v in obj.items() if k not in SCHEMA_KEYS}
        return cls(
            obj["article_id"],
            tuple(abstract),
            tuple(names),
            tuple(tuple(s) for s in sections),
            extra,
        )

    def to_dict(self) -> dict:
        d = {
            "article_id": self.article_id,
            "abstract_text": list(self.abstract_sentences),
            "section_names": list(self.section_names),
            "sections": [list(s) for s in self.sections],
        }
        d.update(self.extra)
        return d

    @property
    def abstract(self) -> str:
        return " ".join(self.abstract_sentences)

    @property
    def abstract_words(self) -> int:
        return count_sentence_words(self.abstract_sentences)

    @property
    def body_sentences(self) -> list[str]:
        return [s for sec in self.sections for s in sec]

    @property
    def body_words(self) -> int:
        return sum(count_sentence_words(sec) for sec in self.sections)


def _is_str_list(value) -> bool:
    return isinstance(value, list) and all(isinstance(v, str) for v in value)


@dataclass(frozen=True)
class LineError:
    line: int
    message: str

    def as_dict(self) -> dict:
        return {"line": self.line, "message": self.message}


def ingest_jsonl(path: str | Path, errors: list[LineError] | None = None) -> Iterator[PaperRecord]:
    """Stream records from a JSONL file in file order.

    The file is opened eagerly so an unreadable path fails here, not on the
    first ``next()``. Bad lines are appended to ``errors`` (and logged) and
    reading continues.
    """
    f = open(path, encoding="utf-8")
    return _iter_records(f, errors)


def _iter_records(f, errors):
    with f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield PaperRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, SchemaError) as exc:
                err = LineError(lineno, f"{type(exc).__name__}: {exc}")
                log.warning("%s:%d: %s", getattr(f, "name", "?"), lineno, err.message)
                if errors is not None:
                    errors.append(err)


def write_jsonl(path: str | Path, records: Iterable[PaperRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# Filtering


@dataclass(frozen=True)
class FilterConstraints:
    max_section_words: int = 1500
    abstract_min_words: int = 50
    abstract_max_words: int = 300
    required_labels: frozenset = frozenset(LABELS)

    def __post_init__(self):
        if self.max_section_words <= 0:
            raise ValueError("max_section_words must be positive")
        if self.abstract_min_words > self.abstract_max_words:
            raise ValueError("abstract word range is empty")
        object.__setattr__(self, "required_labels",
                           frozenset(SectionLabel.parse(x) for x in self.required_labels))


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None
    detail: str | None = None

    def __bool__(self) -> bool:
        return self.accepted


def filter_for_summarization(
    record: PaperRecord,
    labels: Sequence[SectionLabel],
    constraints: FilterConstraints = FilterConstraints(),
) -> Verdict:
    """Decide whether a labeled paper is usable for summarization.

    Rules are checked in order: required labels, section length, abstract
    length. The verdict names the first one that fails.
    """
    if len(labels) != len(record.sections):
        raise ValueError(
            f"{len(labels)} labels for {len(record.sections)} sections in {record.article_id}"
        )
    present = set(labels)
    missing = [lab.value for lab in LABELS
               if lab in constraints.required_labels and lab not in present]
    if missing:
        return Verdict(False, "missing_labels", "missing: " + ", ".join(missing))
    for name, sents in zip(record.section_names, record.sections):
        n = count_sentence_words(sents)
        if n > constraints.max_section_words:
            return Verdict(False, "section_too_long",
                           f"{name!r} has {n} words > {constraints.max_section_words}")
    n = record.abstract_words
    if n < constraints.abstract_min_words:
        return Verdict(False, "abstract_too_short", f"{n} words < {constraints.abstract_min_words}")
    if n > constraints.abstract_max_words:
        return Verdict(False, "abstract_too_long", f"{n} words > {constraints.abstract_max_words}")
    return Verdict(True)


# ---------------------------------------------------------------------------
# Statistics


@dataclass(frozen=True)
class _Tally:
    count: int = 0
    words: int = 0
    sentences: int = 0

    def __add__(self, other: _Tally) -> _Tally:
        return _Tally(self.count + other.count, self.words + other.words,
                      self.sentences + other.sentences)

    def means(self) -> dict:
        if self.count == 0:
            return {"num": 0, "word_avg": None, "sent_avg": None, "defined": False}
        return {"num": self.count, "word_avg": self.words / self.count,
                "sent_avg": self.sentences / self.count, "defined": True}


@dataclass(frozen=True)
class CorpusStats:
    """Chapter and document statistics; stores sums so stats merge exactly."""

    chapters: dict = field(default_factory=lambda: {lab: _Tally() for lab in LABELS})
    documents: _Tally = _Tally()
    abstracts: _Tally = _Tally()

    def merge(self, other: CorpusStats) -> CorpusStats:
        return CorpusStats(
            {lab: self.chapters[lab] + other.chapters[lab] for lab in LABELS},
            self.documents + other.documents,
            self.abstracts + other.abstracts,
        )

    @property
    def doc_count(self) -> int:
        return self.documents.count

    def label(self, label: SectionLabel) -> dict:
        return self.chapters[label].means()

    def as_dict(self) -> dict:
        docs = self.documents.means()
        abstracts = self.abstracts.means()
        return {
            "chapters": {lab.value: self.chapters[lab].means() for lab in LABELS},
            "documents": {
                "num": docs["num"],
                "word_avg": docs["word_avg"],
                "sent_avg": docs["sent_avg"],
                "abstract_word_avg": abstracts["word_avg"],
                "abstract_sent_avg": abstracts["sent_avg"],
                "defined": docs["defined"],
            },
        }


def corpus_stats(records: Iterable[PaperRecord],
                 labels: Iterable[Sequence[SectionLabel]]) -> CorpusStats:
    """Per-label chapter counts and means plus document and abstract means.

    Unmapped chapters count toward document length but not toward any label.
    """
    chapters = {lab: _Tally() for lab in LABELS}
    docs = _Tally()
    abstracts = _Tally()
    for rec, labs in zip(records, labels, strict=True):
        if len(labs) != len(rec.sections):
            raise ValueError(f"label count mismatch for {rec.article_id}")
        for lab, sents in zip(labs, rec.sections):
            if lab in chapters:
                chapters[lab] += _Tally(1, count_sentence_words(sents), len(sents))
        docs += _Tally(1, rec.body_words, len(rec.body_sentences))
        abstracts += _Tally(1, rec.abstract_words, len(rec.abstract_sentences))
    return CorpusStats(chapters, docs, abstracts)


# ---------------------------------------------------------------------------
# Where abstract content comes from


@dataclass(frozen=True)
class PositionHistogram:
    positions: tuple[float, ...]
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"positions": list(self.positions), "edges": list(self.edges),
                "counts": list(self.counts)}


def position_similarity(record: PaperRecord, embedder: Embedder | None = None,
                        bins: int = 10) -> PositionHistogram:
    """Relative body position of the best-matching sentence for each abstract sentence.

    Position is index / (n - 1) over the flattened body, 0 for a one-sentence
    body; ties go to the earliest sentence. The default embedder is TF-IDF fit
    on the body sentences.
    """
    body = record.body_sentences
    if not body:
        raise ValueError(f"{record.article_id}: body has no sentences")
    if not record.abstract_sentences:
        raise ValueError(f"{record.article_id}: abstract has no sentences")
    if embedder is None:
        embedder = TfidfEmbedder(body)
    body_vecs = [embedder.embed(s) for s in body]
    positions = []
    for sent in record.abstract_sentences:
        v = embedder.embed(sent)
        sims = [cosine(v, b) for b in body_vecs]
        best = int(np.argmax(sims))  # first maximum
        positions.append(best / (len(body) - 1) if len(body) > 1 else 0.0)
    edges = tuple(i / bins for i in range(bins + 1))
    counts = [0] * bins
    for p in positions:
        counts[min(int(p * bins), bins - 1)] += 1
    return PositionHistogram(tuple(positions), edges, tuple(counts))
