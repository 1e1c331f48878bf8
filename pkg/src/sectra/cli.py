"""Command-line entry point.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from contextlib import ExitStack
from dataclasses import replace
from pathlib import Path

import numpy as np

from .backends import BackendClient, BackendError, JudgeCriteria, build_judge_prompt
from .corpus import corpus_stats
from .headings import HeadingMapError, canonicalize_heading, load_heading_map
from .labels import LABELS, SectionLabel
from .metrics import bootstrap_ci, macro_scores
from .pipeline import (ConfigError, PipelineConfig, StageError, build_context, dump_json,
                       load_corpus, mapped_chapters, process_record, run, train_from_map,
                       write_jsonl)
from .sfr import SfrModel, TrainConfig, compose_input, confusion, predict, train

log = logging.getLogger("sectra")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, help="output directory (overrides config)")
    p.add_argument("--corpus", help="corpus JSONL (overrides config)")
    p.add_argument("--jobs", type=int, default=1, help="documents processed in parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sectra", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a corpus and write stats.json")
    _common(p)
    p = sub.add_parser("normalize", help="heading-map coverage report")
    _common(p)
    p.add_argument("--headings", type=Path, help="plain list of headings, one per line")
    p = sub.add_parser("sfr-train", help="train the local section classifier")
    _common(p)
    p = sub.add_parser("sfr-eval", help="confusion matrix and macro scores")
    _common(p)
    p.add_argument("--model", type=Path, help="evaluate this model on all mapped chapters")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p = sub.add_parser("classify", help="label every section of every paper")
    _common(p)
    p = sub.add_parser("summarize", help="generate summaries")
    _common(p)
    p = sub.add_parser("evaluate", help="ROUGE and GEM_CR against gold abstracts")
    _common(p)
    p.add_argument("--summaries", type=Path, help="JSONL with article_id and text")
    p = sub.add_parser("judge", help="LLM-judge scores through the judge backend")
    _common(p)
    p.add_argument("--summaries", type=Path, help="JSONL with article_id and text")
    p = sub.add_parser("run", help="all stages end to end")
    _common(p)
    return parser


def load_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = str(args.out)
    if args.corpus is not None:
        overrides["corpus"] = args.corpus if args.corpus.startswith("sectra:") \
            else str(Path(args.corpus).resolve())
    config = replace(config, **overrides)
    config.validate()
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return config


def _read_summaries(path: Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            if not isinstance(row.get("article_id"), str) or not isinstance(row.get("text"), str):
                raise ConfigError(f"{path}:{lineno}: need string 'article_id' and 'text'")
            out[row["article_id"]] = row["text"]
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(config, args):
    corpus = load_corpus(config)
    heading_map = load_heading_map(config.heading_map)
    labels = [[heading_map.lookup(n) for n in rec.section_names] for rec in corpus.records]
    stats = corpus_stats(corpus.records, labels)
    report = {"records": len(corpus.records),
              "errors": [e.as_dict() for e in corpus.errors],
              "stats": stats.as_dict()}
    dump_json(Path(config.out) / "stats.json", report)
    print(f"{len(corpus.records)} records, {len(corpus.errors)} errors")


def cmd_normalize(config, args):
    heading_map = load_heading_map(config.heading_map)
    if args.headings:
        with open(args.headings, encoding="utf-8") as f:
            headings = [line.strip() for line in f if line.strip() and not line.startswith("#")]
    else:
        headings = [n for rec in load_corpus(config).records for n in rec.section_names]
    by_label: Counter = Counter()
    unmapped: Counter = Counter()
    for h in headings:
        lab = heading_map.lookup(h)
        by_label[lab.value] += 1
        if lab is SectionLabel.UNMAPPED:
            unmapped[canonicalize_heading(h)] += 1
    total = len(headings)
    mapped = total - by_label[SectionLabel.UNMAPPED.value]
    report = {
        "map": heading_map.provenance,
        "map_entries": len(heading_map),
        "headings": total,
        "mapped": mapped,
        "coverage": mapped / total if total else None,
        "by_label": {lab.value: by_label[lab.value] for lab in SectionLabel},
        "unmapped": dict(sorted(unmapped.items())),
    }
    dump_json(Path(config.out) / "normalize.json", report)
    pct = f"{100 * mapped / total:.1f}%" if total else "n/a"
    print(f"{mapped}/{total} headings mapped ({pct})")


def cmd_sfr_train(config, args):
    corpus = load_corpus(config)
    heading_map = load_heading_map(config.heading_map)
    model = train_from_map(corpus.records, heading_map, config)
    if model is None:
        raise ConfigError("no chapter heading in the corpus is covered by the heading map")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "sfr_model.npz")
    dump_json(out / "sfr_train.json", {
        "n_train": model.metadata["n_train"],
        "loss_history": model.metadata["loss_history"],
        "final_loss": model.final_loss,
        "warnings": model.warnings,
        "composition": config.composition.name,
    })
    print(f"trained on {model.metadata['n_train']} chapters, final loss {model.final_loss}")


def cmd_sfr_eval(config, args):
    corpus = load_corpus(config)
    heading_map = load_heading_map(config.heading_map)
    pairs = mapped_chapters(corpus.records, heading_map)
    if not pairs:
        raise ConfigError("no labeled chapters to evaluate")
    texts = [compose_input(ch, config.composition) for ch, _ in pairs]
    labels = [lab for _, lab in pairs]
    if args.model:
        model = SfrModel.load(args.model)
        test_idx = np.arange(len(texts))
    else:
        if not 0 < args.test_fraction < 1:
            raise ConfigError("--test-fraction must be in (0, 1)")
        order = np.random.default_rng(config.seed).permutation(len(texts))
        n_test = max(1, int(round(args.test_fraction * len(texts))))
        test_idx, train_idx = np.sort(order[:n_test]), np.sort(order[n_test:])
        if len(train_idx) == 0:
            raise ConfigError("not enough chapters to split into train and test")
        s = config.sfr
        model = train([texts[i] for i in train_idx], [labels[i] for i in train_idx],
                      TrainConfig(s.learning_rate, s.epochs, s.batch_size, config.seed, s.l2),
                      s.feature_dim, s.ngram_orders)
    y_true = [labels[i] for i in test_idx]
    y_pred = [predict(model, texts[i])[0] for i in test_idx]
    cm = confusion(y_true, y_pred)
    scores = macro_scores(cm)

    def macro_f1_of(rows):
        idx = rows.astype(int)
        return macro_scores(confusion([y_true[i] for i in idx], [y_pred[i] for i in idx])).macro_f1

    m = config.metrics
    ci = bootstrap_ci(np.arange(len(y_true)), m.ci_level, m.bootstrap_resamples, config.seed,
                      statistic=macro_f1_of)
    names = [lab.value for lab in LABELS]
    dump_json(Path(config.out) / "sfr_eval.json", {
        "composition": config.composition.name,
        "n_test": len(y_true),
        "confusion": cm.as_dict(),
        "scores": scores.as_dict(names),
        "macro_f1_ci": list(ci),
    })
    print(f"Macro_P={scores.macro_p:.4f} Macro_R={scores.macro_r:.4f} "
          f"Macro_F1={scores.macro_f1:.4f} CI=[{ci[0]:.4f}, {ci[1]:.4f}]")


def cmd_classify(config, args):
    corpus = load_corpus(config)
    with ExitStack() as stack:
        ctx = build_context(config, corpus.records, stack)
        try:
            rows = [{"article_id": rec.article_id,
                     "sections": [s.as_dict() for s in ctx.labeler.label(rec)]}
                    for rec in corpus.records]
        except BackendError as exc:
            raise StageError("classify", None, str(exc)) from exc
    write_jsonl(Path(config.out) / "labels.jsonl", rows)
    print(f"labeled {len(rows)} papers")


def cmd_summarize(config, args):
    corpus = load_corpus(config)
    with ExitStack() as stack:
        ctx = build_context(config, corpus.records, stack)
        outcomes = [process_record(ctx, rec, evaluate_summary=False) for rec in corpus.records]
    rows = [o["summary"] for o in sorted(outcomes, key=lambda o: o["article_id"]) if o.get("summary")]
    write_jsonl(Path(config.out) / "summaries.jsonl", rows)
    print(f"{len(rows)} summaries written")


def cmd_evaluate(config, args):
    summaries = _read_summaries(args.summaries) if args.summaries else None
    report, _ = run(config, args.jobs, summaries)
    _print_aggregate(report)


def cmd_run(config, args):
    report, _ = run(config, args.jobs)
    _print_aggregate(report)


def cmd_judge(config, args):
    if "judge" not in config.backends:
        raise ConfigError("the judge command needs backends.judge in the config")
    corpus = load_corpus(config)
    provided = _read_summaries(args.summaries) if args.summaries else None
    criteria = JudgeCriteria()
    with ExitStack() as stack:
        ctx = build_context(config, corpus.records, stack)
        judge = stack.enter_context(BackendClient(config.backends["judge"]))
        results = []
        for rec in sorted(corpus.records, key=lambda r: r.article_id):
            if provided is not None:
                if rec.article_id not in provided:
                    continue
                text = provided[rec.article_id]
            else:
                outcome = process_record(ctx, rec, evaluate_summary=False)
                if outcome["status"] != "accepted":
                    continue
                text = outcome["summary"]["text"]
            prompt = build_judge_prompt(criteria, rec.abstract, text)
            try:
                scores = judge.judge(prompt)
            except BackendError as exc:
                raise StageError("judge", rec.article_id, str(exc)) from exc
            results.append({"article_id": rec.article_id, **scores.as_dict()})
    means = {a: (float(np.mean([r[a] for r in results])) if results else None)
             for a in ("informativeness", "coherence", "readability")}
    dump_json(Path(config.out) / "judge.json", {"documents": results, "mean": means})
    print(json.dumps(means))


def _print_aggregate(report: dict) -> None:
    agg = report["aggregate"]
    print(f"{agg['documents']} documents: {agg.get('accepted', 0)} accepted, "
          f"{agg.get('rejected', 0)} rejected")
    for group, vals in agg["metrics"].items():
        key = "f1" if "f1" in vals else "score"
        if key in vals:
            lo, hi = vals[key]["ci"]
            print(f"  {group:7s} {key:5s} {vals[key]['mean']:.4f}  [{lo:.4f}, {hi:.4f}]")
    if "failure" in report:
        print(f"FAILED: {report['failure']['message']}", file=sys.stderr)


COMMANDS = {
    "ingest": cmd_ingest,
    "normalize": cmd_normalize,
    "sfr-train": cmd_sfr_train,
    "sfr-eval": cmd_sfr_eval,
    "classify": cmd_classify,
    "summarize": cmd_summarize,
    "evaluate": cmd_evaluate,
    "judge": cmd_judge,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sectra: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        COMMANDS[args.command](config, args)
    except (ConfigError, HeadingMapError) as exc:
        print(f"sectra: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StageError, BackendError, OSError) as exc:
        print(f"sectra: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
