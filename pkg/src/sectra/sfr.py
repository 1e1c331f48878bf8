"""Structural function recognition: chapter -> Background/Method/Result/Conclusion.

The local model is a multinomial logistic regression over hashed bag-of-
n-gram features. It keeps the softmax head and cross-entropy objective of a
fine-tuned encoder classifier while staying small enough to train on a
laptop; larger encoders are reachable through ``sectra.backends``.
"""

from __future__ import annotations

import json
import math
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .headings import canonicalize_heading
from .labels import LABELS, SectionLabel
from .metrics import tokenize

MODEL_FORMAT_VERSION = 1
N_CLASSES = len(LABELS)


# ---------------------------------------------------------------------------
# Input composition


@dataclass(frozen=True)
class Chapter:
    title: str
    sentences: tuple[str, ...]
    source_article: str = ""


VARIANTS = ("title", "text", "title_text", "title_head_tail")


@dataclass(frozen=True)
class CompositionStrategy:
    """How a chapter is turned into classifier input.

    variant is one of ``title``, ``text``, ``title_text`` or
    ``title_head_tail``; ``percent`` applies to the last only.
    """

    variant: str = "title_head_tail"
    percent: float = 50
    token_budget: int = 512

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown composition variant {self.variant!r}")
        if not 0 < self.percent <= 100:
            raise ValueError("percent must be in (0, 100]")
        if self.token_budget <= 0:
            raise ValueError("token_budget must be positive")

    @property
    def uses_title(self) -> bool:
        return self.variant != "text"

    @property
    def uses_text(self) -> bool:
        return self.variant != "title"

    @property
    def name(self) -> str:
        if self.variant == "title_head_tail":
            return f"title+{self.percent:g}%(head+tail)"
        return {"title": "title", "text": "text", "title_text": "title+text"}[self.variant]


# Title, text and title+text baselines plus head/tail at 25, 50 and 75 percent.
STANDARD_STRATEGIES = (
    CompositionStrategy("title"),
    CompositionStrategy("text"),
    CompositionStrategy("title_text"),
    CompositionStrategy("title_head_tail", 25),
    CompositionStrategy("title_head_tail", 50),
    CompositionStrategy("title_head_tail", 75),
)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def head_tail_indices(n: int, percent: float) -> list[int]:
    """Indices of the first ceil(k/2) and last floor(k/2) of n sentences, k = round(p% * n)."""
    k = _round_half_up(percent / 100 * n)
    head = (k + 1) // 2
    tail = k // 2
    if head + tail >= n:
        return list(range(n))
    return list(range(head)) + list(range(n - tail, n))


def compose_input(chapter: Chapter, strategy: CompositionStrategy = CompositionStrategy()) -> str:
    if strategy.uses_text and not chapter.sentences:
        raise ValueError(f"chapter {chapter.title!r} has no sentences")
    title_tokens = canonicalize_heading(chapter.title).split() if strategy.uses_title else []
    if strategy.variant == "title_head_tail":
        idx = head_tail_indices(len(chapter.sentences), strategy.percent)
        body = [chapter.sentences[i] for i in idx]
    elif strategy.uses_text:
        body = list(chapter.sentences)
    else:
        body = []
    budget = strategy.token_budget
    # the title wins over body text; it is cut only if it alone exceeds the budget
    tokens = title_tokens[:budget]
    for sent in body:
        room = budget - len(tokens)
        if room <= 0:
            break
        tokens.extend(sent.split()[:room])
    return " ".join(tokens)


# ---------------------------------------------------------------------------
# Features


def _bucket(ngram: str, dim: int) -> int:
    return zlib.crc32(ngram.encode("utf-8")) & (dim - 1)


def featurize(text: str, feature_dim: int = 1 << 18,
              ngram_orders: Sequence[int] = (1, 2)) -> dict[int, float]:
    """Hashed, L2-normalized bag of n-grams as ``{bucket: value}``."""
    tokens = tokenize(text)
    counts: dict[int, float] = {}
    for n in ngram_orders:
        for i in range(len(tokens) - n + 1):
            b = _bucket(" ".join(tokens[i:i + n]), feature_dim)
            counts[b] = counts.get(b, 0.0) + 1.0
    norm = math.sqrt(sum(v * v for v in counts.values()))
    if norm == 0:
        return {}
    return {k: v / norm for k, v in sorted(counts.items())}


# ---------------------------------------------------------------------------
# Softmax head and loss


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite logits")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, true_labels, floor: float = 1e-12) -> float:
    """Mean negative log-probability of the true class."""
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    y = np.asarray([_label_index(t) for t in true_labels], dtype=int)
    if p.shape[0] == 0 or y.size == 0:
        raise ValueError("empty batch")
    if p.shape[0] != y.size:
        raise ValueError("batch size mismatch")
    picked = p[np.arange(y.size), y]
    return float(-np.mean(np.log(np.maximum(picked, floor))))


def cross_entropy_grad(logits, true_labels) -> np.ndarray:
    """d(mean cross-entropy of softmax(logits)) / d(logits) = (P - Y) / m."""
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.asarray([_label_index(t) for t in true_labels], dtype=int)
    grad = softmax(z)
    grad[np.arange(y.size), y] -= 1.0
    return grad / y.size


def _label_index(label) -> int:
    if isinstance(label, SectionLabel):
        if label not in LABELS:
            raise ValueError(f"{label} is not a terminal label")
        return label.index
    return int(label)


# ---------------------------------------------------------------------------
# Model


@dataclass
class SfrModel:
    feature_dim: int = 1 << 18
    ngram_orders: tuple[int, ...] = (1, 2)
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.feature_dim <= 0 or self.feature_dim & (self.feature_dim - 1):
            raise ValueError("feature_dim must be a power of two")
        self.ngram_orders = tuple(self.ngram_orders)
        if self.weights is None:
            self.weights = np.zeros((N_CLASSES, self.feature_dim))
        if self.bias is None:
            self.bias = np.zeros(N_CLASSES)
        if self.weights.shape != (N_CLASSES, self.feature_dim) or self.bias.shape != (N_CLASSES,):
            raise ValueError("weight shapes do not match feature_dim")

    @property
    def final_loss(self) -> float | None:
        history = self.metadata.get("loss_history") or []
        return history[-1] if history else None

    @property
    def warnings(self) -> list[str]:
        return self.metadata.setdefault("warnings", [])

    def features(self, text: str) -> dict[int, float]:
        return featurize(text, self.feature_dim, self.ngram_orders)

    def logits(self, text: str) -> np.ndarray:
        feats = self.features(text)
        z = self.bias.copy()
        if feats:
            idx = np.fromiter(feats.keys(), dtype=np.int64, count=len(feats))
            val = np.fromiter(feats.values(), dtype=float, count=len(feats))
            z += self.weights[:, idx] @ val
        return z

    def predict(self, text: str) -> tuple[SectionLabel, np.ndarray]:
        return predict(self, text)

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": MODEL_FORMAT_VERSION,
            "feature_dim": self.feature_dim,
            "ngram_orders": list(self.ngram_orders),
            "metadata": self.metadata,
        }
        # only touched columns are stored; untouched ones are exactly zero
        cols = np.flatnonzero(np.any(self.weights != 0, axis=0))
        with open(path, "wb") as f:
            np.savez_compressed(f, meta=np.array(json.dumps(meta, sort_keys=True)),
                                cols=cols, values=self.weights[:, cols], bias=self.bias)

    @classmethod
    def load(cls, path: str | Path) -> SfrModel:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            version = meta.get("format_version")
            if version != MODEL_FORMAT_VERSION:
                raise ValueError(
                    f"{path}: model format version {version!r}, expected {MODEL_FORMAT_VERSION}"
                )
            weights = np.zeros((N_CLASSES, meta["feature_dim"]))
            weights[:, z["cols"]] = z["values"]
            return cls(meta["feature_dim"], tuple(meta["ngram_orders"]), weights,
                       z["bias"].copy(), meta["metadata"])


def predict(model: SfrModel, text: str) -> tuple[SectionLabel, np.ndarray]:
    """Most probable label and the probability vector in canonical label order.

    np.argmax returns the first maximum, which is the canonical tie-break.
    """
    probs = softmax(model.logits(text))
    return LABELS[int(np.argmax(probs))], probs


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    l2: float = 0.0


def _batch_matrix(feats: Sequence[dict[int, float]]):
    """Dense (batch x active-columns) block plus the active column ids."""
    cols = sorted({k for f in feats for k in f})
    pos = {c: j for j, c in enumerate(cols)}
    x = np.zeros((len(feats), len(cols)))
    for i, f in enumerate(feats):
        for k, v in f.items():
            x[i, pos[k]] = v
    return x, np.asarray(cols, dtype=np.int64)


def _dataset_loss(model: SfrModel, feats, y) -> float:
    x, cols = _batch_matrix(feats)
    z = x @ model.weights[:, cols].T + model.bias
    return cross_entropy(softmax(z), y)


def train(
    texts: Sequence[str],
    labels: Sequence[SectionLabel],
    config: TrainConfig = TrainConfig(),
    feature_dim: int = 1 << 18,
    ngram_orders: Sequence[int] = (1, 2),
) -> SfrModel:
    """Fit by mini-batch gradient descent on mean cross-entropy.

    Weights start at zero and the shuffle order comes from ``config.seed``,
    so a fixed seed reproduces the weights bit for bit. The per-epoch
    training loss is kept in ``model.metadata["loss_history"]``.
    """
    if len(texts) != len(labels):
        raise ValueError("texts and labels differ in length")
    model = SfrModel(feature_dim, tuple(ngram_orders))
    model.metadata.update({
        "learning_rate": config.learning_rate, "epochs": config.epochs,
        "batch_size": config.batch_size, "seed": config.seed, "l2": config.l2,
        "n_train": len(texts), "loss_history": [], "warnings": [],
    })
    if not texts:
        raise ValueError("no training data")
    y = np.asarray([_label_index(lab) for lab in labels], dtype=int)
    distinct = sorted(set(y.tolist()))
    if len(distinct) < 2:
        msg = f"degenerate training data: only label {LABELS[distinct[0]].value}"
        model.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if config.epochs <= 0:
        return model

    feats = [model.features(t) for t in texts]
    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(len(feats))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            x, cols = _batch_matrix([feats[i] for i in batch])
            w = model.weights[:, cols]
            z = x @ w.T + model.bias
            g = cross_entropy_grad(z, y[batch])
            grad_w = g.T @ x
            if config.l2:
                grad_w += config.l2 * w
            model.weights[:, cols] = w - lr * grad_w
            model.bias -= lr * g.sum(axis=0)
        model.metadata["loss_history"].append(_dataset_loss(model, feats, y))
    return model


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows: true label, columns: predicted label

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict:
        return {
            "labels": [lab.value for lab in LABELS],
            "counts": self.counts.astype(int).tolist(),
        }


def confusion(true_labels: Iterable, predicted: Iterable) -> ConfusionMatrix:
    m = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(true_labels, predicted, strict=True):
        m[_label_index(t), _label_index(p)] += 1
    return ConfusionMatrix(m)


def evaluate(model: SfrModel, texts: Sequence[str],
             labels: Sequence[SectionLabel]) -> ConfusionMatrix:
    if not texts:
        raise ValueError("empty test set")
    preds = [predict(model, t)[0] for t in texts]
    return confusion(labels, preds)
