"""Task metrics: accuracy, MCC, token F1 and ROUGE-avg.

Predictions may be ``None`` (no answer could be extracted); they never match.
"""
from __future__ import annotations

import math
import re
import string
from collections import Counter
from collections.abc import Sequence

from .errors import LengthMismatch

METRIC_RANGES = {
    "accuracy": (0.0, 1.0),
    "mcc": (-1.0, 1.0),
    "token_f1": (0.0, 1.0),
    "exact_match": (0.0, 1.0),
    "rouge_avg": (0.0, 1.0),
}


def _check(preds: Sequence, golds: Sequence) -> None:
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions for {len(golds)} references")
    if not golds:
        raise LengthMismatch("metrics need at least one example")


def accuracy(preds: Sequence[str | None], golds: Sequence[str]) -> float:
    _check(preds, golds)
    return sum(p is not None and p == g for p, g in zip(preds, golds)) / len(golds)


def confusion(preds: Sequence[str | None], golds: Sequence[str], positive: str | None = None):
    """``(tp, tn, fp, fn)`` for a binary task.

    A missing prediction counts as the wrong class. ``positive`` defaults to
    the lexicographically larger of the observed gold labels.
    """
    _check(preds, golds)
    labels = sorted(set(golds) | {p for p in preds if p is not None})
    if len(labels) > 2:
        raise ValueError(f"MCC is binary here; got labels {labels}")
    if positive is None:
        positive = max(golds)
    tp = tn = fp = fn = 0
    for p, g in zip(preds, golds):
        if g == positive:
            if p == positive:
                tp += 1
            else:
                fn += 1
        elif p is not None and p == g:
            tn += 1
        else:
            fp += 1
    return tp, tn, fp, fn


def mcc_from_counts(tp: int, tn: int, fp: int, fn: int) -> float:
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def mcc(preds: Sequence[str | None], golds: Sequence[str], positive: str | None = None) -> float:
    return mcc_from_counts(*confusion(preds, golds, positive))


_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_answer(s: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def exact_match(preds: Sequence[str | None], golds: Sequence[str]) -> float:
    _check(preds, golds)
    return sum(
        p is not None and normalize_answer(p) == normalize_answer(g) for p, g in zip(preds, golds)
    ) / len(golds)


def f1_single(pred: str | None, gold: str) -> float:
    p = normalize_answer(pred or "").split()
    g = normalize_answer(gold).split()
    if not p or not g:
        return float(p == g)
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(p), common / len(g)
    return 2 * precision * recall / (precision + recall)


def token_f1(preds: Sequence[str | None], golds: Sequence[str]) -> float:
    _check(preds, golds)
    return sum(f1_single(p, g) for p, g in zip(preds, golds)) / len(golds)


def rouge_tokens(s: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", s.lower())


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f(overlap: float, n_pred: int, n_ref: int) -> float:
    if n_pred == 0 or n_ref == 0 or overlap == 0:
        return 0.0
    p, r = overlap / n_pred, overlap / n_ref
    return 2 * p * r / (p + r)


def rouge_n(pred: str, ref: str, n: int) -> float:
    a, b = _ngrams(rouge_tokens(pred), n), _ngrams(rouge_tokens(ref), n)
    return _f(sum((a & b).values()), sum(a.values()), sum(b.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(pred: str, ref: str) -> float:
    a, b = rouge_tokens(pred), rouge_tokens(ref)
    return _f(lcs_length(a, b), len(a), len(b))


def rouge_avg_single(pred: str | None, ref: str) -> float:
    pred = pred or ""
    return (rouge_n(pred, ref, 1) + rouge_n(pred, ref, 2) + rouge_l(pred, ref)) / 3


def rouge_avg(preds: Sequence[str | None], golds: Sequence[str]) -> float:
    _check(preds, golds)
    return sum(rouge_avg_single(p, g) for p, g in zip(preds, golds)) / len(golds)


METRICS = {
    "accuracy": accuracy,
    "mcc": mcc,
    "token_f1": token_f1,
    "exact_match": exact_match,
    "rouge_avg": rouge_avg,
}
