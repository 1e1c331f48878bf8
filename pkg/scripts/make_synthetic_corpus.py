"""Regenerate the bundled five-document demo corpus."""

import argparse
import json
from pathlib import Path

from sectra.synthetic import bundled_corpus

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "sectra" / "data" / "synthetic_corpus.jsonl"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    docs = bundled_corpus(args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc) + "\n")
    print(f"wrote {len(docs)} papers to {args.out}")


if __name__ == "__main__":
    main()
