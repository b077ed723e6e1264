"""Deterministic query feature extraction backing rule conditions.

The lexicons that drive the feature flags ship as an editable JSON asset
(``assets/lexicons.json``) so deployments can tune them without code changes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import EmptyQuery

_TOKEN_RE = re.compile(r"[a-z0-9]+")

#: Feature flags rule conditions may reference by name.
FEATURE_FLAGS = frozenset(
    {"has_numeric_request", "seeks_definition", "seeks_fact_with_explanation"}
)


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase and split on non-alphanumerics. Shared across the package."""
    return tuple(_TOKEN_RE.findall(text.lower()))


@dataclass(frozen=True)
class QueryFeatures:
    normalized_text: tuple[str, ...]
    has_numeric_request: bool
    interrogative_markers: frozenset[str]
    seeks_definition: bool
    seeks_fact_with_explanation: bool
    matched_keywords: frozenset[str]
    token_count: int

    def flag(self, name: str) -> bool:
        if name not in FEATURE_FLAGS:
            raise KeyError(name)
        return getattr(self, name)


def _load_default_lexicons() -> dict:
    with resources.files("ragroute.assets").joinpath("lexicons.json").open() as fh:
        return json.load(fh)


def contains_phrase(tokens: tuple[str, ...], phrase: str) -> bool:
    """True iff the normalized phrase occurs contiguously in the token stream."""
    needle = tokenize(phrase)
    if not needle:
        return False
    n = len(needle)
    return any(tokens[i : i + n] == needle for i in range(len(tokens) - n + 1))


class FeatureExtractor:
    """Turns raw query text into :class:`QueryFeatures`.

    Pure and deterministic: identical text always yields identical features.
    """

    def __init__(self, lexicons: dict | None = None):
        lex = lexicons if lexicons is not None else _load_default_lexicons()
        self.numeric_phrases = list(lex["numeric_phrases"])
        self.numeric_patterns = [re.compile(p) for p in lex["numeric_patterns"]]
        self.definition_phrases = list(lex["definition_phrases"])
        self.explanation_phrases = list(lex["explanation_phrases"])
        self.interrogatives = set(lex["interrogatives"])

    def extract(self, query_text: str) -> QueryFeatures:
        if not query_text or not query_text.strip():
            raise EmptyQuery("query text is empty")
        tokens = tokenize(query_text)
        joined = " ".join(tokens)

        matched = set()
        for phrase in self.numeric_phrases:
            if contains_phrase(tokens, phrase):
                matched.add(phrase)
        pattern_hit = any(p.search(joined) for p in self.numeric_patterns)
        has_numeric = bool(matched) or pattern_hit

        markers = frozenset(t for t in tokens if t in self.interrogatives)

        definition_hit = any(
            contains_phrase(tokens, p) for p in self.definition_phrases
        )
        seeks_definition = definition_hit and not has_numeric

        explanation_hit = any(
            contains_phrase(tokens, p) for p in self.explanation_phrases
        )
        seeks_fact_with_explanation = has_numeric and explanation_hit

        return QueryFeatures(
            normalized_text=tokens,
            has_numeric_request=has_numeric,
            interrogative_markers=markers,
            seeks_definition=seeks_definition,
            seeks_fact_with_explanation=seeks_fact_with_explanation,
            matched_keywords=frozenset(matched),
            token_count=len(tokens),
        )


@lru_cache(maxsize=1)
def _default_extractor() -> FeatureExtractor:
    return FeatureExtractor()


def extract_features(query_text: str) -> QueryFeatures:
    """Extract features with the default shipped lexicons."""
    return _default_extractor().extract(query_text)
