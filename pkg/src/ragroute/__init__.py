"""Rule-driven routing for hybrid-source retrieval-augmented QA."""

from .cache import CacheEntry, CacheStats, MetaCache
from .embeddings import HashingEmbedder, cosine, embed
from .engine import score_paths
from .evidence import EvidenceBundle, RetrievalContext, gather_evidence
from .evolution import (
    DiagnosticsReport,
    OutcomeRecord,
    UpdateLoop,
    build_diagnostics,
    record_outcome,
    update_rules_agent,
    update_rules_heuristic,
)
from .features import QueryFeatures, extract_features
from .harness import (
    EvalMetrics,
    ExperimentConfig,
    compute_oracle,
    emit_report,
    run_experiment,
)
from .metrics import exact_match, normalize_answer, token_f1
from .paths import DEFAULT_PRIORITY, Path, PathScores, select_path
from .router import Router, RoutingDecision
from .rules import Rule, RuleSet, load_seed_rules, parse_rules, serialize_rules

__version__ = "0.1.0"

__all__ = [
    "CacheEntry",
    "CacheStats",
    "DEFAULT_PRIORITY",
    "DiagnosticsReport",
    "EvalMetrics",
    "EvidenceBundle",
    "ExperimentConfig",
    "HashingEmbedder",
    "MetaCache",
    "OutcomeRecord",
    "Path",
    "PathScores",
    "QueryFeatures",
    "RetrievalContext",
    "Router",
    "RoutingDecision",
    "Rule",
    "RuleSet",
    "UpdateLoop",
    "build_diagnostics",
    "compute_oracle",
    "cosine",
    "embed",
    "emit_report",
    "exact_match",
    "extract_features",
    "gather_evidence",
    "load_seed_rules",
    "normalize_answer",
    "parse_rules",
    "record_outcome",
    "run_experiment",
    "score_paths",
    "select_path",
    "serialize_rules",
    "token_f1",
    "update_rules_agent",
    "update_rules_heuristic",
]
