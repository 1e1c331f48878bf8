"""Train and score the local section classifier under every composition strategy.

Chapters whose headings hit the heading map are split into train/test with a
seeded permutation; one row per strategy is printed (and optionally saved).
"""

import argparse
import json
from pathlib import Path

import numpy as np

from sectra.headings import load_heading_map
from sectra.metrics import macro_scores
from sectra.pipeline import PipelineConfig, load_corpus, mapped_chapters
from sectra.sfr import STANDARD_STRATEGIES, TrainConfig, compose_input, evaluate, train


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", help="corpus JSONL (default: bundled demo corpus)")
    parser.add_argument("--heading-map", help="TSV heading map (default: bundled seed map)")
    parser.add_argument("--test-fraction", type=float, default=0.25)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, help="write the rows as JSON here")
    args = parser.parse_args()

    config = PipelineConfig(**({"corpus": str(Path(args.corpus).resolve())} if args.corpus else {}))
    records = load_corpus(config).records
    pairs = mapped_chapters(records, load_heading_map(args.heading_map))
    if len(pairs) < 2:
        parser.error("need at least two labeled chapters")
    order = np.random.default_rng(args.seed).permutation(len(pairs))
    n_test = max(1, round(args.test_fraction * len(pairs)))
    test, tr = order[:n_test], order[n_test:]

    rows = []
    for strategy in STANDARD_STRATEGIES:
        texts = [compose_input(ch, strategy) for ch, _ in pairs]
        labels = [lab for _, lab in pairs]
        model = train([texts[i] for i in tr], [labels[i] for i in tr],
                      TrainConfig(epochs=args.epochs, seed=args.seed))
        s = macro_scores(evaluate(model, [texts[i] for i in test], [labels[i] for i in test]))
        rows.append({"strategy": strategy.name, "macro_p": s.macro_p,
                     "macro_r": s.macro_r, "macro_f1": s.macro_f1})
        print(f"{strategy.name:24s} P={s.macro_p:.4f} R={s.macro_r:.4f} F1={s.macro_f1:.4f}")
    print(f"({len(tr)} train / {len(test)} test chapters)")
    if args.out:
        args.out.write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
