"""Evaluation math: ROUGE, macro P/R/F1, GEM_CR and helpers."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .labels import LABELS, SectionLabel, SectionWeights
from .text import count_words

_NON_ALNUM = re.compile(r"[^0-9a-z]+")
_stemmer = None


def _stem(token: str) -> str:
    global _stemmer
    if _stemmer is None:
        try:
            from nltk.stem.porter import PorterStemmer
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise ImportError("stemming requires nltk (pip install 'sectra[stem]')") from exc
        _stemmer = PorterStemmer()
    return _stemmer.stem(token)


def tokenize(text: str, stem: bool = False) -> list[str]:
    """Lowercase, split on anything that is not [0-9a-z], drop empties."""
    tokens = [t for t in _NON_ALNUM.split(text.lower()) if t]
    if stem:
        tokens = [_stem(t) for t in tokens]
    return tokens


# ---------------------------------------------------------------------------
# ROUGE


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> RougeScore:
        denom = precision + recall
        f1 = 2 * precision * recall / denom if denom > 0 else 0.0
        return cls(precision, recall, f1)

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = ngrams(candidate, n)
    ref = ngrams(reference, n)
    matches = sum((cand & ref).values())
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    precision = matches / cand_total if cand_total else 0.0
    recall = matches / ref_total if ref_total else 0.0
    return RougeScore.from_pr(precision, recall)


def lcs_length(a: Sequence, b: Sequence) -> int:
    """LCS length with the bit-parallel recurrence (one big-int word per row of ``b``)."""
    if not a or not b:
        return 0
    masks: dict = {}
    for i, tok in enumerate(a):
        masks[tok] = masks.get(tok, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for tok in b:
        u = v & masks.get(tok, 0)
        v = ((v + u) | (v - u)) & full
    return len(a) - bin(v).count("1")


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Summary-level ROUGE-L over the whole token sequences."""
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    return RougeScore.from_pr(precision, recall)


def rouge_all(candidate: str, reference: str, stem: bool = False) -> dict[str, RougeScore]:
    cand = tokenize(candidate, stem)
    ref = tokenize(reference, stem)
    return {
        "rouge1": rouge_n(cand, ref, 1),
        "rouge2": rouge_n(cand, ref, 2),
        "rougeL": rouge_l(cand, ref),
    }


# ---------------------------------------------------------------------------
# Classification scores


@dataclass(frozen=True)
class MacroScores:
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    macro_p: float
    macro_r: float
    macro_f1: float
    # class indices whose precision / recall denominator was zero (scored as 0)
    undefined_precision: tuple[int, ...] = ()
    undefined_recall: tuple[int, ...] = ()

    def as_dict(self, names: Sequence[str] | None = None) -> dict:
        names = list(names) if names else [str(i) for i in range(len(self.precision))]
        return {
            "per_class": {
                name: {"precision": p, "recall": r}
                for name, p, r in zip(names, self.precision, self.recall)
            },
            "macro_p": self.macro_p,
            "macro_r": self.macro_r,
            "macro_f1": self.macro_f1,
            "undefined_precision": [names[i] for i in self.undefined_precision],
            "undefined_recall": [names[i] for i in self.undefined_recall],
        }


def macro_scores(cm) -> MacroScores:
    """Macro precision/recall from a confusion matrix (rows true, cols predicted).

    Macro F1 is the harmonic mean of the two macro averages, which in general
    differs from the mean of per-class F1.
    """
    m = np.asarray(getattr(cm, "counts", cm), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.size == 0:
        raise ValueError("confusion matrix must be a non-empty square matrix")
    if m.sum() <= 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(m)
    col = m.sum(axis=0)
    row = m.sum(axis=1)
    precision, recall = [], []
    undef_p, undef_r = [], []
    for i in range(m.shape[0]):
        if col[i] > 0:
            precision.append(float(diag[i] / col[i]))
        else:
            precision.append(0.0)
            undef_p.append(i)
        if row[i] > 0:
            recall.append(float(diag[i] / row[i]))
        else:
            recall.append(0.0)
            undef_r.append(i)
    n = len(precision)
    macro_p = sum(precision) / n
    macro_r = sum(recall) / n
    denom = macro_p + macro_r
    macro_f1 = 2 * macro_p * macro_r / denom if denom > 0 else 0.0
    return MacroScores(tuple(precision), tuple(recall), macro_p, macro_r, macro_f1,
                       tuple(undef_p), tuple(undef_r))


# ---------------------------------------------------------------------------
# Embedding and sentence-to-section assignment


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class TfidfEmbedder:
    """TF-IDF over unigrams and bigrams, fit on a small set of documents.

    idf uses the smoothed form ln((1 + N) / (1 + df)) + 1; vectors are
    L2-normalized. Terms outside the fitted vocabulary are ignored.
    """

    def __init__(self, documents: Iterable[str], ngram_orders: Sequence[int] = (1, 2),
                 stem: bool = False):
        self.ngram_orders = tuple(ngram_orders)
        self.stem = stem
        docs = [self._terms(d) for d in documents]
        df: Counter = Counter()
        for terms in docs:
            df.update(set(terms))
        self.vocabulary = {term: i for i, term in enumerate(sorted(df))}
        n = len(docs)
        self.idf = np.array(
            [math.log((1 + n) / (1 + df[t])) + 1.0 for t in sorted(df)], dtype=float
        )

    def _terms(self, text: str) -> list[tuple[str, ...]]:
        tokens = tokenize(text, self.stem)
        out: list[tuple[str, ...]] = []
        for n in self.ngram_orders:
            out.extend(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
        return out

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for term, count in Counter(self._terms(text)).items():
            j = self.vocabulary.get(term)
            if j is not None:
                vec[j] = count * self.idf[j]
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def assign_sections(
    sentences: Sequence[str],
    sections: Sequence[tuple[SectionLabel, str]],
    embedder: Embedder | None = None,
) -> list[SectionLabel]:
    """Label each summary sentence with its most similar source section.

    Ties resolve to the canonically earliest label, then the earliest section.
    """
    sections = [(lab, text) for lab, text in sections if lab in LABELS]
    if not sections:
        raise ValueError("need at least one labeled source section")
    if not sentences:
        return []
    if embedder is None:
        embedder = TfidfEmbedder(text for _, text in sections)
    section_vecs = [(lab, embedder.embed(text)) for lab, text in sections]
    order = sorted(range(len(section_vecs)), key=lambda i: (section_vecs[i][0].index, i))
    labels = []
    for sent in sentences:
        v = embedder.embed(sent)
        best, best_sim = None, -math.inf
        for i in order:
            sim = cosine(v, section_vecs[i][1])
            if sim > best_sim:
                best, best_sim = section_vecs[i][0], sim
        labels.append(best)
    return labels


# ---------------------------------------------------------------------------
# GEM_CR

_SENT_END = re.compile(r"(?<=[.!?])(?:\s+|$)")


def split_sentences(text: str, min_tokens: int = 2) -> list[str]:
    """Split on '.', '!' or '?' followed by whitespace or end of text.

    Pieces shorter than ``min_tokens`` tokens are merged into the previous
    sentence (or the following one when they open the text).
    """
    pieces = [p.strip() for p in _SENT_END.split(text) if p and p.strip()]
    out: list[str] = []
    pending = ""
    for piece in pieces:
        if pending:
            piece = f"{pending} {piece}"
            pending = ""
        if len(tokenize(piece)) < min_tokens:
            if out:
                out[-1] = f"{out[-1]} {piece}"
            else:
                pending = piece
            continue
        out.append(piece)
    if pending:
        out.append(pending)
    return out


def norm_rational(r: float) -> float:
    return r / (1.0 + r)


NORMS: dict[str, Callable[[float], float]] = {"r/(1+r)": norm_rational}

DEFAULT_WEIGHTS = SectionWeights()


@dataclass(frozen=True)
class GemCrReport:
    covered: tuple[SectionLabel, ...]
    source_labels: tuple[SectionLabel, ...]
    coverage: float
    compression_ratio: float
    normalized_ratio: float
    score: float
    norm: str
    sentences: tuple[str, ...] = ()
    assignments: tuple[SectionLabel, ...] = ()

    def as_dict(self) -> dict:
        return {
            "covered": [lab.value for lab in self.covered],
            "source_labels": [lab.value for lab in self.source_labels],
            "coverage": self.coverage,
            "compression_ratio": self.compression_ratio,
            "normalized_ratio": self.normalized_ratio,
            "norm": self.norm,
            "score": self.score,
            "assignments": [lab.value for lab in self.assignments],
        }


def coverage(covered: Iterable[SectionLabel], source: Iterable[SectionLabel],
             weights: Mapping[SectionLabel, float] = DEFAULT_WEIGHTS) -> float:
    source = set(source)
    total = sum(weights[lab] for lab in source)
    if total <= 0:
        return 0.0
    return sum(weights[lab] for lab in set(covered) & source) / total


def gem_cr(
    summary: str,
    sections: Sequence[tuple[SectionLabel, str]],
    weights: Mapping[SectionLabel, float] = DEFAULT_WEIGHTS,
    embedder: Embedder | None = None,
    norm: str = "r/(1+r)",
) -> GemCrReport:
    """Weighted section coverage of a summary times its normalized compression ratio."""
    sections = [(lab, text) for lab, text in sections if lab in LABELS]
    if not sections:
        raise ValueError("source sections are empty")
    summary_words = count_words(summary)
    if summary_words == 0:
        raise ValueError("summary is empty")
    source_words = sum(count_words(text) for _, text in sections)
    sentences = split_sentences(summary)
    assigned = assign_sections(sentences, sections, embedder)
    source_labels = tuple(lab for lab in LABELS if any(s == lab for s, _ in sections))
    covered = tuple(lab for lab in LABELS if lab in assigned)
    cov = coverage(covered, source_labels, weights)
    r = source_words / summary_words
    nr = NORMS[norm](r)
    return GemCrReport(covered, source_labels, cov, r, nr, cov * nr, norm,
                       tuple(sentences), tuple(assigned))


# ---------------------------------------------------------------------------
# Confidence intervals and length profiles


def bootstrap_ci(
    samples: Sequence[float],
    level: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
    statistic: Callable[[np.ndarray], float] | None = None,
) -> tuple[float, float]:
    """Percentile bootstrap interval of the sample mean (or ``statistic``)."""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if statistic is None and np.all(data == data[0]):
        return float(data[0]), float(data[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(resamples, data.size))
    if statistic is None:
        stats = data[idx].mean(axis=1)
    else:
        stats = np.array([statistic(data[row]) for row in idx])
    alpha = (1 - level) / 2
    lo, hi = np.percentile(stats, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


@dataclass(frozen=True)
class LengthHistogram:
    edges: tuple[int, ...]
    counts: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"edges": list(self.edges), "counts": list(self.counts)}


def length_histogram(summaries: Iterable[str | int], bin_width: int) -> LengthHistogram:
    """Word-count histogram with bins [lo, lo + width) aligned to multiples of the width."""
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    lengths = [s if isinstance(s, int) else count_words(s) for s in summaries]
    if not lengths:
        return LengthHistogram((), ())
    start = (min(lengths) // bin_width) * bin_width
    nbins = (max(lengths) - start) // bin_width + 1
    counts = [0] * nbins
    for n in lengths:
        counts[(n - start) // bin_width] += 1
    edges = tuple(start + i * bin_width for i in range(nbins + 1))
    return LengthHistogram(edges, tuple(counts))
