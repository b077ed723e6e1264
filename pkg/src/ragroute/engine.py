"""Additive rule scoring over the four augmentation paths."""

from __future__ import annotations

from typing import Optional

from .conditions import JudgeClient, evaluate_condition
from .errors import JudgeError
from .features import FeatureExtractor, QueryFeatures, extract_features
from .paths import FiredRule, Path, PathScores, select_path  # noqa: F401
from .rules import RuleSet


def score_paths(
    query_text: str,
    ruleset: RuleSet,
    judge: Optional[JudgeClient] = None,
    extractor: Optional[FeatureExtractor] = None,
) -> PathScores:
    """Evaluate every rule against the query and sum deltas per target path.

    Base score is 0 for every path; ``fired_rules`` records provenance in
    rule-evaluation order. Judge calls for semantic predicates are memoized
    per (query, predicate) within this call.
    """
    feats: QueryFeatures = (
        extractor.extract(query_text) if extractor else extract_features(query_text)
    )
    scores = {p: 0 for p in Path}
    fired: list[FiredRule] = []
    memo: dict = {}
    for rule in ruleset.rules:
        try:
            hit = evaluate_condition(
                rule.condition, feats, judge, query_text=query_text, _memo=memo
            )
        except JudgeError as exc:
            raise JudgeError(f"rule {rule.id!r}: {exc}") from exc
        if hit:
            scores[rule.target_path] += rule.delta
            fired.append(FiredRule(rule.id, rule.target_path, rule.delta))
    return PathScores(scores=scores, fired_rules=tuple(fired))
