"""ROUGE-1/2/L F1 with the evaluation tokenizer (lowercase, punctuation
split, no stemming)."""

from collections import Counter
from dataclasses import dataclass

from ..corpus.vocab import tokenize
from ..errors import InvalidBatchError


@dataclass
class RougeScore:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    empty_reference: bool = False


def _f1(p, r):
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n):
    """Clipped n-gram overlap score between two texts."""
    cand = _ngrams(tokenize(candidate), n)
    ref = _ngrams(tokenize(reference), n)
    if not ref:
        return RougeScore(empty_reference=True)
    if not cand:
        return RougeScore()
    overlap = sum(min(c, ref[g]) for g, c in cand.items())
    p = overlap / sum(cand.values())
    r = overlap / sum(ref.values())
    return RougeScore(p, r, _f1(p, r))


def _lcs_len(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference):
    """Longest-common-subsequence score between two texts."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not ref:
        return RougeScore(empty_reference=True)
    if not cand:
        return RougeScore()
    lcs = _lcs_len(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    return RougeScore(p, r, _f1(p, r))


METRICS = ("rouge1", "rouge2", "rougeL")


def score_pair(candidate, reference):
    return {"rouge1": rouge_n(candidate, reference, 1),
            "rouge2": rouge_n(candidate, reference, 2),
            "rougeL": rouge_l(candidate, reference)}


def corpus_rouge(pairs):
    """Unweighted mean P/R/F1 over (candidate, reference) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidBatchError("corpus_rouge needs at least one pair")
    sums = {m: [0.0, 0.0, 0.0] for m in METRICS}
    warned = False
    for cand, ref in pairs:
        scored = score_pair(cand, ref)
        for m in METRICS:
            s = scored[m]
            sums[m][0] += s.precision
            sums[m][1] += s.recall
            sums[m][2] += s.f1
            warned = warned or s.empty_reference
    n = len(pairs)
    return {m: RougeScore(sums[m][0] / n, sums[m][1] / n, sums[m][2] / n,
                          empty_reference=warned)
            for m in METRICS}


def write_score_table(path, scores):
    with open(path, "w", encoding="utf-8") as f:
        f.write("metric\tP\tR\tF1\n")
        for m in METRICS:
            s = scores[m]
            f.write(f"{m}\t{s.precision!r}\t{s.recall!r}\t{s.f1!r}\n")
