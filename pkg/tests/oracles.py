"""Reference implementations used only by tests.

Each one is written as the naive textbook computation and shares no code
with the package.
"""

import itertools
import math


def rouge_n_bruteforce(cand, ref, n):
    def grams(seq):
        return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]

    cg, rg = grams(cand), grams(ref)
    matches = 0
    for g in set(cg) | set(rg):
        in_c = sum(1 for x in cg if x == g)
        in_r = sum(1 for x in rg if x == g)
        matches += min(in_c, in_r)
    p = matches / len(cg) if cg else 0.0
    r = matches / len(rg) if rg else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def lcs_dp(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


def lcs_exhaustive(a, b):
    """Longest subsequence of ``a`` that is also a subsequence of ``b``."""
    def is_subseq(s, t):
        it = iter(t)
        return all(x in it for x in s)

    for k in range(len(a), 0, -1):
        for idx in itertools.combinations(range(len(a)), k):
            if is_subseq([a[i] for i in idx], b):
                return k
    return 0


def macro_by_formula(cm):
    """Per-class precision/recall and macro values, written out term by term."""
    n = len(cm)
    P, R = [], []
    for c in range(n):
        correct = cm[c][c]
        classified_as_c = sum(cm[t][c] for t in range(n))
        in_c = sum(cm[c][p] for p in range(n))
        P.append(correct / classified_as_c if classified_as_c else 0.0)
        R.append(correct / in_c if in_c else 0.0)
    mp = sum(P) / n
    mr = sum(R) / n
    mf = 2 * mp * mr / (mp + mr) if mp + mr else 0.0
    return P, R, mp, mr, mf


def tfidf_cosine(sentence, docs):
    """Cosine between a sentence and each doc under smoothed TF-IDF of unigrams+bigrams."""
    def terms(text):
        toks = [t for t in "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()]
        return toks + [a + " " + b for a, b in zip(toks, toks[1:])]

    doc_terms = [terms(d) for d in docs]
    vocab = sorted({t for d in doc_terms for t in d})
    N = len(docs)
    idf = {t: math.log((1 + N) / (1 + sum(t in d for d in doc_terms))) + 1 for t in vocab}

    def vec(ts):
        return {t: ts.count(t) * idf[t] for t in set(ts) if t in idf}

    def cos(u, v):
        dot = sum(u[k] * v.get(k, 0.0) for k in u)
        nu = math.sqrt(sum(x * x for x in u.values()))
        nv = math.sqrt(sum(x * x for x in v.values()))
        return dot / (nu * nv) if nu and nv else 0.0

    s = vec(terms(sentence))
    return [cos(s, vec(d)) for d in doc_terms]
