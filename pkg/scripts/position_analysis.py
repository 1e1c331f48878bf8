"""Where in the body do abstract sentences come from?

For every abstract sentence, finds the most similar body sentence under
TF-IDF cosine and histograms its relative position (0 = first, 1 = last).
"""

import argparse
from pathlib import Path

import numpy as np

from sectra.corpus import ingest_jsonl, position_similarity
from sectra.pipeline import BUNDLED_CORPUS, bundled_path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("corpus", nargs="?", type=Path, default=bundled_path(BUNDLED_CORPUS))
    parser.add_argument("--bins", type=int, default=10)
    args = parser.parse_args()

    errors = []
    counts = np.zeros(args.bins, dtype=int)
    positions = []
    for rec in ingest_jsonl(args.corpus, errors):
        if not rec.body_sentences or not rec.abstract_sentences:
            continue
        h = position_similarity(rec, bins=args.bins)
        counts += h.counts
        positions.extend(h.positions)
    for e in errors:
        print(f"skipped line {e.line}: {e.message}")
    if not positions:
        parser.error("no usable papers")

    width = max(counts.max(), 1)
    for i, c in enumerate(counts):
        lo, hi = i / args.bins, (i + 1) / args.bins
        print(f"[{lo:.2f}, {hi:.2f}) {c:6d} {'#' * round(40 * c / width)}")
    print(f"{len(positions)} abstract sentences, mean position {np.mean(positions):.3f}")


if __name__ == "__main__":
    main()
