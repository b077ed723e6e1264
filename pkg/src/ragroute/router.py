"""Per-query routing orchestration: cache first, rule scoring on miss."""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Optional

from .cache import DEFAULT_TAU, MetaCache
from .conditions import JudgeClient
from .embeddings import EmbeddingProvider, HashingEmbedder, embed
from .engine import score_paths, select_path
from .errors import EmptyBatch, NormalizationError, ProviderError, RagRouteError
from .features import FeatureExtractor, tokenize
from .paths import Path, PathScores
from .rules import RuleSet


def query_id_for(query_text: str) -> str:
    """Stable content hash of the normalized query text."""
    normalized = " ".join(tokenize(query_text))
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RoutingDecision:
    query_id: str
    query_text: str
    scores: PathScores
    chosen_path: Path
    source: str  # "cache_hit" | "scorer"
    cache_similarity: Optional[float]
    ruleset_version: int
    routing_latency: float
    cache_degraded: bool = False

    def as_record(self) -> dict:
        """Deterministic serialization (latency deliberately excluded)."""
        return {
            "query_id": self.query_id,
            "query_text": self.query_text,
            "scores": {p.value: self.scores[p] for p in Path},
            "fired_rules": [
                [f.rule_id, f.target_path.value, f.delta]
                for f in self.scores.fired_rules
            ],
            "chosen_path": self.chosen_path.value,
            "source": self.source,
            "cache_similarity": self.cache_similarity,
            "ruleset_version": self.ruleset_version,
            "cache_degraded": self.cache_degraded,
        }


class Router:
    """Routes queries to augmentation paths using the meta-cache and rules.

    The cache is consulted before any rule evaluation. On an
    embedding-provider failure the router degrades to scorer-only rather than
    failing the query. Rule-set replacement is an atomic swap that invalidates
    the cache on version change.
    """

    def __init__(
        self,
        ruleset: RuleSet,
        cache: Optional[MetaCache] = None,
        provider: Optional[EmbeddingProvider] = None,
        tau: float = DEFAULT_TAU,
        judge: Optional[JudgeClient] = None,
        extractor: Optional[FeatureExtractor] = None,
    ):
        self._ruleset = ruleset
        self.cache = cache
        self.tau = tau
        self.judge = judge
        self.extractor = extractor
        if cache is not None and provider is None:
            provider = HashingEmbedder(cache.dim)
        self.provider = provider
        self.scorer_invocations = 0
        self._swap_lock = threading.Lock()

    @property
    def ruleset(self) -> RuleSet:
        return self._ruleset

    def set_ruleset(self, ruleset: RuleSet) -> None:
        """Atomic rule-set swap; cached decisions under old rules are dropped."""
        with self._swap_lock:
            changed = ruleset.version != self._ruleset.version
            self._ruleset = ruleset
            if changed and self.cache is not None:
                self.cache.invalidate_all()

    def route(self, query_text: str) -> RoutingDecision:
        start = time.perf_counter()
        ruleset = self._ruleset
        qid = query_id_for(query_text)

        z = None
        degraded = False
        if self.cache is not None:
            try:
                z = embed(query_text, self.provider, self.cache.dim)
            except (ProviderError, NormalizationError):
                degraded = True
            if z is not None:
                hit = self.cache.lookup(z, self.tau)
                if hit is not None:
                    entry, sim = hit
                    return RoutingDecision(
                        query_id=qid,
                        query_text=query_text,
                        scores=entry.scores,
                        chosen_path=entry.chosen_path,
                        source="cache_hit",
                        cache_similarity=sim,
                        ruleset_version=ruleset.version,
                        routing_latency=time.perf_counter() - start,
                    )

        scores = self._score(query_text, ruleset)
        chosen = select_path(scores, ruleset.priority_order)
        if z is not None:
            self.cache.insert(z, scores, chosen, ruleset.priority_order)
        return RoutingDecision(
            query_id=qid,
            query_text=query_text,
            scores=scores,
            chosen_path=chosen,
            source="scorer",
            cache_similarity=None,
            ruleset_version=ruleset.version,
            routing_latency=time.perf_counter() - start,
            cache_degraded=degraded,
        )

    def _score(self, query_text: str, ruleset: RuleSet) -> PathScores:
        self.scorer_invocations += 1
        return score_paths(query_text, ruleset, self.judge, self.extractor)

    def route_batch(
        self, queries: list[str], fail_fast: bool = False
    ) -> list[RoutingDecision | RagRouteError]:
        """Sequential routing; cache effects of earlier queries are visible to
        later ones. Per-item errors are returned in place unless fail_fast."""
        if not queries:
            raise EmptyBatch("route_batch requires a non-empty query list")
        out: list[RoutingDecision | RagRouteError] = []
        for q in queries:
            try:
                out.append(self.route(q))
            except RagRouteError as exc:
                if fail_fast:
                    raise
                out.append(exc)
        return out
