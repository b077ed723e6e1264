"""Answer grading: normalization, token-overlap F1, and exact match."""

from __future__ import annotations

import re
import string
from collections import Counter
from typing import Sequence

_ARTICLES = re.compile(r"\b(a|an|the)\b")


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    text = text.lower()
    text = _ARTICLES.sub(" ", text)
    text = "".join(ch for ch in text if ch not in string.punctuation)
    return " ".join(text.split())


def _f1_single(predicted: str, gold: str) -> float:
    pred_tokens = normalize_answer(predicted).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(predicted: str, golds: Sequence[str]) -> float:
    """Token-multiset F1, maximum over gold answers."""
    if not golds:
        raise ValueError("golds must be non-empty")
    return max(_f1_single(predicted, g) for g in golds)


def exact_match(predicted: str, golds: Sequence[str]) -> bool:
    """True iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise ValueError("golds must be non-empty")
    norm = normalize_answer(predicted)
    return any(norm == normalize_answer(g) for g in golds)
