"""Word counting and truncation.

A word is a whitespace-delimited token. Every budget, filter and length
statistic in the package goes through these two helpers.
"""

from __future__ import annotations

import re

_WORD = re.compile(r"\S+")


def count_words(text: str) -> int:
    return len(text.split())


def count_sentence_words(sentences) -> int:
    return sum(count_words(s) for s in sentences)


def truncate_words(text: str, limit: int) -> str:
    """Keep the first ``limit`` words, preserving the original spacing before the cut."""
    if limit <= 0:
        return ""
    end = None
    for i, m in enumerate(_WORD.finditer(text)):
        if i == limit - 1:
            end = m.end()
            break
    if end is None:
        return text.strip()
    return text[:end].strip()
