"""End-to-end pipeline: ingest -> label -> filter -> summarize -> evaluate."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .backends import (BackendClient, BackendConfig, GenerationParams, RemoteClassifier,
                       RemoteEmbedder, RemoteGenerator)
from .corpus import (FilterConstraints, LineError, PaperRecord, corpus_stats,
                     filter_for_summarization, ingest_jsonl, position_similarity)
from .headings import HeadingMap, load_heading_map
from .labels import LABELS, SectionLabel, SectionWeights
from .metrics import (NORMS, bootstrap_ci, gem_cr, length_histogram, macro_scores,
                      rouge_all)
from .sfr import (Chapter, CompositionStrategy, SfrModel, TrainConfig, compose_input,
                  evaluate, predict, train)
from .summarizer import (GeneratedSummary, extractive_fallback, plan, summarize_divide,
                         summarize_full)

log = logging.getLogger(__name__)

BUNDLED_CORPUS = "sectra:data/synthetic_corpus.jsonl"
CAPABILITIES = ("classify", "generate", "judge", "embed")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, article_id: str | None, message: str):
        where = f" (article {article_id})" if article_id else ""
        super().__init__(f"stage {stage!r} failed{where}: {message}")
        self.stage = stage
        self.article_id = article_id


def bundled_path(ref: str) -> Path:
    name = ref.split(":", 1)[1]
    return Path(str(resources.files("sectra").joinpath(name)))


@dataclass(frozen=True)
class SfrSettings:
    feature_dim: int = 1 << 18
    ngram_orders: tuple[int, ...] = (1, 2)
    learning_rate: float = 1.0
    epochs: int = 20
    batch_size: int = 16
    l2: float = 0.0
    model: str | None = None  # pre-trained model file; trained from the corpus when unset


@dataclass(frozen=True)
class MetricSettings:
    stemming: bool = False
    norm: str = "r/(1+r)"
    ci_level: float = 0.95
    bootstrap_resamples: int = 1000
    length_bin_width: int = 25
    position_bins: int = 10


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str = BUNDLED_CORPUS
    heading_map: str | None = None
    composition: CompositionStrategy = CompositionStrategy()
    sfr: SfrSettings = SfrSettings()
    backends: dict = field(default_factory=dict)
    generation: GenerationParams = GenerationParams()
    summary_mode: str = "divide"
    weights: SectionWeights = field(default_factory=SectionWeights)
    total_cap: int = 300
    filter: FilterConstraints = FilterConstraints()
    metrics: MetricSettings = MetricSettings()
    seed: int = 0
    out: str = "out"

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> PipelineConfig:
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw: dict[str, Any] = {}
            for key in ("corpus", "heading_map", "out"):
                if d.get(key) is not None:
                    kw[key] = _resolve(d[key], base_dir)
            if "composition" in d:
                kw["composition"] = CompositionStrategy(**d["composition"])
            if "sfr" in d:
                s = dict(d["sfr"])
                if "ngram_orders" in s:
                    s["ngram_orders"] = tuple(s["ngram_orders"])
                if s.get("model"):
                    s["model"] = _resolve(s["model"], base_dir)
                kw["sfr"] = SfrSettings(**s)
            if "backends" in d:
                backends = {}
                for cap, cfg in (d["backends"] or {}).items():
                    if cap not in CAPABILITIES:
                        raise ConfigError(f"unknown backend capability {cap!r}")
                    if cfg:
                        backends[cap] = BackendConfig.from_dict(cfg)
                kw["backends"] = backends
            if "generation" in d:
                kw["generation"] = GenerationParams(**d["generation"])
            if "weights" in d:
                kw["weights"] = SectionWeights.from_dict(d["weights"])
            if "filter" in d:
                f = dict(d["filter"])
                if "required_labels" in f:
                    f["required_labels"] = frozenset(f["required_labels"])
                kw["filter"] = FilterConstraints(**f)
            if "metrics" in d:
                kw["metrics"] = MetricSettings(**d["metrics"])
            for key in ("summary_mode", "total_cap", "seed"):
                if key in d:
                    kw[key] = d[key]
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, path.parent)

    def validate(self) -> None:
        if self.summary_mode not in ("divide", "full"):
            raise ConfigError("summary_mode must be 'divide' or 'full'")
        if self.total_cap <= 0:
            raise ConfigError("total_cap must be positive")
        if self.metrics.norm not in NORMS:
            raise ConfigError(f"unknown norm {self.metrics.norm!r}; choose from {sorted(NORMS)}")
        if self.metrics.length_bin_width <= 0 or self.metrics.position_bins <= 0:
            raise ConfigError("histogram bin settings must be positive")
        for label, path in (("corpus", self.corpus_path), ("heading_map", self.heading_map),
                            ("sfr.model", self.sfr.model)):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{label} path does not exist: {path}")

    @property
    def corpus_path(self) -> Path:
        if self.corpus.startswith("sectra:"):
            return bundled_path(self.corpus)
        return Path(self.corpus)

    def snapshot(self) -> dict:
        """Serializable config that reproduces the run; output location excluded."""
        d = {
            "corpus": self.corpus,
            "heading_map": self.heading_map,
            "composition": asdict(self.composition),
            "sfr": {**asdict(self.sfr), "ngram_orders": list(self.sfr.ngram_orders)},
            "backends": {cap: cfg.as_dict() for cap, cfg in sorted(self.backends.items())},
            "generation": asdict(self.generation),
            "summary_mode": self.summary_mode,
            "weights": self.weights.as_dict(),
            "total_cap": self.total_cap,
            "filter": {
                "max_section_words": self.filter.max_section_words,
                "abstract_min_words": self.filter.abstract_min_words,
                "abstract_max_words": self.filter.abstract_max_words,
                "required_labels": [lab.value for lab in LABELS
                                    if lab in self.filter.required_labels],
            },
            "metrics": asdict(self.metrics),
            "seed": self.seed,
        }
        return d


def _resolve(value: str, base_dir: Path | None) -> str:
    if value.startswith("sectra:"):
        return value
    p = Path(value)
    if base_dir is not None and not p.is_absolute():
        p = base_dir / p
    return str(p.resolve())


# ---------------------------------------------------------------------------
# Stages


@dataclass
class Corpus:
    records: list[PaperRecord]
    errors: list[LineError]


def load_corpus(config: PipelineConfig) -> Corpus:
    errors: list[LineError] = []
    records: list[PaperRecord] = []
    seen: set[str] = set()
    for rec in ingest_jsonl(config.corpus_path, errors):
        if rec.article_id in seen:
            errors.append(LineError(0, f"duplicate article_id {rec.article_id!r} skipped"))
            continue
        seen.add(rec.article_id)
        records.append(rec)
    return Corpus(records, errors)


@dataclass(frozen=True)
class LabeledSection:
    name: str
    label: SectionLabel
    source: str  # "map", "model", "remote" or "none"
    sentences: tuple[str, ...]

    def as_dict(self) -> dict:
        return {"name": self.name, "label": self.label.value, "source": self.source}


def mapped_chapters(records: Sequence[PaperRecord], heading_map: HeadingMap):
    """Chapters whose heading the map resolves, as (Chapter, label) pairs in corpus order."""
    out = []
    for rec in records:
        for name, sents in zip(rec.section_names, rec.sections):
            label = heading_map.lookup(name)
            if label is not SectionLabel.UNMAPPED and sents:
                out.append((Chapter(name, sents, rec.article_id), label))
    return out


def train_from_map(records, heading_map, config: PipelineConfig) -> SfrModel | None:
    pairs = mapped_chapters(records, heading_map)
    if not pairs:
        return None
    texts = [compose_input(ch, config.composition) for ch, _ in pairs]
    labels = [lab for _, lab in pairs]
    s = config.sfr
    return train(texts, labels,
                 TrainConfig(s.learning_rate, s.epochs, s.batch_size, config.seed, s.l2),
                 feature_dim=s.feature_dim, ngram_orders=s.ngram_orders)


class SectionLabeler:
    """Heading map first; chapters the map misses go to the classifier."""

    def __init__(self, heading_map: HeadingMap,
                 classifier: Callable[[str], tuple[SectionLabel, Any]] | None = None,
                 strategy: CompositionStrategy = CompositionStrategy(),
                 classifier_name: str = "model"):
        self.heading_map = heading_map
        self.classifier = classifier
        self.strategy = strategy
        self.classifier_name = classifier_name

    def label(self, record: PaperRecord) -> list[LabeledSection]:
        out = []
        for name, sents in zip(record.section_names, record.sections):
            label = self.heading_map.lookup(name)
            source = "map"
            if label is SectionLabel.UNMAPPED:
                source = "none"
                if self.classifier is not None and (sents or not self.strategy.uses_text):
                    text = compose_input(Chapter(name, sents, record.article_id), self.strategy)
                    label, _ = self.classifier(text)
                    source = self.classifier_name
            out.append(LabeledSection(name, label, source, sents))
        return out


@dataclass
class Context:
    """Everything the per-document stage needs; built once per run."""

    config: PipelineConfig
    labeler: SectionLabeler
    generator: Callable
    embedder: Any = None
    model: SfrModel | None = None


def build_context(config: PipelineConfig, records: Sequence[PaperRecord], stack: ExitStack) -> Context:
    heading_map = load_heading_map(config.heading_map)
    clients = {cap: stack.enter_context(BackendClient(cfg)) for cap, cfg in config.backends.items()}
    model = None
    if "classify" in clients:
        classifier, cname = RemoteClassifier(clients["classify"]), "remote"
    else:
        if config.sfr.model:
            model = SfrModel.load(config.sfr.model)
        else:
            model = train_from_map(records, heading_map, config)
        classifier = (lambda text, m=model: predict(m, text)) if model else None
        cname = "model"
    labeler = SectionLabeler(heading_map, classifier, config.composition, cname)
    if "generate" in clients:
        generator = RemoteGenerator(clients["generate"], config.generation)
    else:
        generator = extractive_fallback
    embedder = RemoteEmbedder(clients["embed"]) if "embed" in clients else None
    return Context(config, labeler, generator, embedder, model)


def summarize_record(ctx: Context, record: PaperRecord,
                     sections: Sequence[LabeledSection]) -> GeneratedSummary:
    pairs = [(s.label, s.sentences) for s in sections if s.label in LABELS]
    summary_plan = plan({lab for lab, _ in pairs}, ctx.config.weights, ctx.config.total_cap)
    if ctx.config.summary_mode == "full":
        return summarize_full(pairs, ctx.generator, summary_plan, record.article_id)
    return summarize_divide(pairs, ctx.generator, summary_plan, record.article_id)


def score_summary(ctx: Context, record: PaperRecord, sections: Sequence[LabeledSection],
                  summary_text: str) -> dict:
    m = ctx.config.metrics
    scores = {k: v.as_dict() for k, v in
              rouge_all(summary_text, record.abstract, m.stemming).items()}
    source = [(s.label, " ".join(s.sentences)) for s in sections if s.label in LABELS]
    if summary_text.strip():
        scores["gem_cr"] = gem_cr(summary_text, source, ctx.config.weights,
                                  ctx.embedder, m.norm).as_dict()
    else:
        scores["gem_cr"] = None
    return scores


def process_record(ctx: Context, record: PaperRecord,
                   summary_override: str | None = None, evaluate_summary: bool = True) -> dict:
    aid = record.article_id
    try:
        sections = ctx.labeler.label(record)
    except Exception as exc:
        raise StageError("classify", aid, str(exc)) from exc
    outcome: dict[str, Any] = {
        "article_id": aid,
        "sections": [s.as_dict() for s in sections],
    }
    verdict = filter_for_summarization(record, [s.label for s in sections], ctx.config.filter)
    if not verdict:
        outcome.update(status="rejected", reason=verdict.reason, detail=verdict.detail)
        return outcome
    outcome["status"] = "accepted"
    if summary_override is not None:
        text = summary_override
        outcome["summary"] = {"article_id": aid, "mode": "provided", "sections": [],
                              "text": text, "total_words": len(text.split())}
    else:
        try:
            summary = summarize_record(ctx, record, sections)
        except Exception as exc:
            raise StageError("summarize", aid, str(exc)) from exc
        text = summary.text
        outcome["summary"] = summary.as_dict()
    if evaluate_summary:
        try:
            outcome["metrics"] = score_summary(ctx, record, sections, text)
        except Exception as exc:
            raise StageError("evaluate", aid, str(exc)) from exc
    return outcome


def map_records(fn: Callable[[PaperRecord], dict], records: Sequence[PaperRecord],
                jobs: int = 1) -> tuple[list[dict], StageError | None]:
    """Apply ``fn`` to every record; collect finished outcomes even if one fails."""
    done: list[dict] = []
    failure: StageError | None = None
    if jobs <= 1:
        for rec in records:
            try:
                done.append(fn(rec))
            except StageError as exc:
                failure = exc
                break
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(fn, rec) for rec in records]
            for fut in futures:
                try:
                    done.append(fut.result())
                except StageError as exc:
                    failure = failure or exc
    done.sort(key=lambda o: o["article_id"])
    return done, failure


# ---------------------------------------------------------------------------
# Aggregation and reporting

METRIC_FIELDS = [
    ("rouge1", "precision"), ("rouge1", "recall"), ("rouge1", "f1"),
    ("rouge2", "precision"), ("rouge2", "recall"), ("rouge2", "f1"),
    ("rougeL", "precision"), ("rougeL", "recall"), ("rougeL", "f1"),
    ("gem_cr", "score"), ("gem_cr", "coverage"), ("gem_cr", "compression_ratio"),
]


def aggregate(outcomes: Sequence[dict], config: PipelineConfig) -> dict:
    scored = [o for o in outcomes if o.get("metrics")]
    m = config.metrics
    agg: dict[str, Any] = {"documents": len(outcomes), "accepted": 0, "rejected": 0,
                           "evaluated": len(scored)}
    for o in outcomes:
        agg[o["status"]] = agg.get(o["status"], 0) + 1
    metrics: dict[str, Any] = {}
    for group, key in METRIC_FIELDS:
        values = [o["metrics"][group][key] for o in scored if o["metrics"].get(group)]
        if not values:
            continue
        lo, hi = bootstrap_ci(values, m.ci_level, m.bootstrap_resamples, config.seed)
        metrics.setdefault(group, {})[key] = {"mean": float(np.mean(values)), "ci": [lo, hi]}
    agg["metrics"] = metrics
    lengths = [o["summary"]["total_words"] for o in outcomes if o.get("summary")]
    agg["length_histogram"] = length_histogram(lengths, m.length_bin_width).as_dict()
    return agg


def position_profile(records: Sequence[PaperRecord], bins: int) -> dict:
    counts = np.zeros(bins, dtype=int)
    for rec in records:
        if rec.body_sentences and rec.abstract_sentences:
            counts += np.asarray(position_similarity(rec, bins=bins).counts)
    return {"edges": [i / bins for i in range(bins + 1)], "counts": counts.tolist()}


def build_report(config: PipelineConfig, corpus: Corpus, outcomes: list[dict],
                 extra: dict | None = None, failure: StageError | None = None) -> dict:
    report = {
        "tool": "sectra",
        "version": __version__,
        "config": config.snapshot(),
        "ingest_errors": [e.as_dict() for e in corpus.errors],
        "documents": outcomes,
        "aggregate": aggregate(outcomes, config),
    }
    if extra:
        report.update(extra)
    if failure is not None:
        report["failure"] = {"stage": failure.stage, "article_id": failure.article_id,
                             "message": str(failure)}
    return report


def dump_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def write_metrics_csv(path: Path, outcomes: Sequence[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["article_id", "status", "reason", "summary_words"] + [
        f"{g}_{k}" for g, k in METRIC_FIELDS]
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for o in outcomes:
            met = o.get("metrics") or {}
            row = [o["article_id"], o["status"], o.get("reason") or "",
                   o["summary"]["total_words"] if o.get("summary") else ""]
            for g, k in METRIC_FIELDS:
                row.append(repr(met[g][k]) if met.get(g) else "")
            w.writerow(row)


def write_jsonl(path: Path, rows: Sequence[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def run(config: PipelineConfig, jobs: int = 1,
        summaries: dict[str, str] | None = None) -> tuple[dict, dict]:
    """Execute every stage and write report.json, metrics.csv, summaries.jsonl.

    Returns ``(report, timings)``. Timings go to their own file so that
    report.json stays byte-identical between runs. On a stage failure the
    partial report is still written and StageError is re-raised.
    """
    config.validate()
    out = Path(config.out)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    corpus = load_corpus(config)
    timings["ingest"] = time.perf_counter() - t0
    with ExitStack() as stack:
        t0 = time.perf_counter()
        try:
            ctx = build_context(config, corpus.records, stack)
        except Exception as exc:
            raise StageError("sfr-train", None, str(exc)) from exc
        timings["sfr"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        fn = lambda rec: process_record(ctx, rec, (summaries or {}).get(rec.article_id)
                                        if summaries is not None else None)
        outcomes, failure = map_records(fn, corpus.records, jobs)
        timings["documents"] = time.perf_counter() - t0
    extra = {"position_histogram": position_profile(corpus.records, config.metrics.position_bins)}
    if ctx.model is not None:
        extra["sfr"] = {"n_train": ctx.model.metadata.get("n_train"),
                        "final_loss": ctx.model.final_loss,
                        "warnings": list(ctx.model.warnings)}
    report = build_report(config, corpus, outcomes, extra, failure)
    dump_json(out / "report.json", report)
    write_metrics_csv(out / "metrics.csv", outcomes)
    write_jsonl(out / "summaries.jsonl", [o["summary"] for o in outcomes if o.get("summary")])
    dump_json(out / "timings.json", {k: round(v, 6) for k, v in timings.items()})
    if failure is not None:
        raise failure
    return report, timings
