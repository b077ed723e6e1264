"""Experiment orchestration: strategies, oracle comparison, report emission.

A run evaluates one strategy over an eval split: a fixed path (basic / doc /
db / hybrid), the static rule baseline, or rule-driven routing with or
without the meta-cache. Routed strategies can first refine rules on a train
split. All analyses are emitted as plot-ready tabular files; timing data
lives in separate files so everything else is byte-deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Optional, Sequence

from .bm25 import DocIndex, load_corpus
from .cache import DEFAULT_TAU, MetaCache
from .dataset import QARecord, load_dataset
from .embeddings import DEFAULT_DIM
from .errors import ConfigError, MissingAnswer, RagRouteError
from .evidence import DEFAULT_TOP_K, EvidenceBundle, RetrievalContext, gather_evidence
from .evolution import ExpertClient, UpdateLoop, record_outcome
from .metrics import exact_match, token_f1
from .paths import DEFAULT_PRIORITY, Path
from .qa import ReplayClient, answer, build_prompt
from .router import Router, RoutingDecision
from .rules import RuleSet, load_seed_rules, parse_rules
from .tables import DEFAULT_MAX_ROWS, TableIndex, TableStore

FIXED_PATH_STRATEGIES = {
    "basic": Path.LLM,
    "doc": Path.Doc,
    "db": Path.DB,
    "hybrid": Path.Hybrid,
}
STRATEGIES = tuple(FIXED_PATH_STRATEGIES) + (
    "rule_based_static",
    "route",
    "route_cached",
)


@dataclass(frozen=True)
class EvalMetrics:
    f1: float
    accuracy: float
    mean_prompt_tokens: float
    mean_routing_time: float
    path_distribution: dict[Path, float]


@dataclass(frozen=True)
class OracleAssignment:
    correct_paths: dict[str, frozenset[Path]]
    oracle_path: dict[str, Path]

    @property
    def accuracy(self) -> float:
        if not self.correct_paths:
            return 0.0
        hits = sum(1 for s in self.correct_paths.values() if s)
        return hits / len(self.correct_paths)

    def distribution(self) -> dict[Path, float]:
        total = len(self.oracle_path)
        out = {p: 0.0 for p in Path}
        for path in self.oracle_path.values():
            out[path] += 1
        return {p: v / total for p, v in out.items()} if total else out


def compute_oracle(
    per_path_answers: dict[tuple[str, Path], str],
    records: Sequence[QARecord],
    priority_order: tuple[Path, ...] = DEFAULT_PRIORITY,
) -> OracleAssignment:
    """Upper-bound assignment: each query goes to a path whose answer is
    correct (earliest in priority), or the priority head if none is."""
    correct_paths: dict[str, frozenset[Path]] = {}
    oracle_path: dict[str, Path] = {}
    for rec in records:
        good = set()
        for path in Path:
            key = (rec.query_id, path)
            if key not in per_path_answers:
                raise MissingAnswer(rec.query_id, path)
            if exact_match(per_path_answers[key], rec.gold_answers):
                good.add(path)
        correct_paths[rec.query_id] = frozenset(good)
        chosen = next((p for p in priority_order if p in good), priority_order[0])
        oracle_path[rec.query_id] = chosen
    return OracleAssignment(correct_paths=correct_paths, oracle_path=oracle_path)


@dataclass
class ExperimentConfig:
    strategy: str
    dataset_path: Optional[str] = None
    records: Optional[list[QARecord]] = None
    train_records: Optional[list[QARecord]] = None
    rules_path: Optional[str] = None
    rules_text: Optional[str] = None
    docs_path: Optional[str] = None
    tables_manifest: Optional[str] = None
    replay_path: Optional[str] = None
    replay_fixture: Optional[list[dict]] = None
    tau: float = DEFAULT_TAU
    cache_capacity: int = 10_000
    embedding_dim: int = DEFAULT_DIM
    batch_size: int = 50
    update_mode: str = "off"
    expert_client: Optional[ExpertClient] = None
    seed: int = 0
    eval_n: Optional[int] = None
    train_n: Optional[int] = None
    top_k: int = DEFAULT_TOP_K
    max_rows: int = DEFAULT_MAX_ROWS


@dataclass
class ExperimentReport:
    strategy: str
    metrics: EvalMetrics
    per_query: list[dict]
    oracle_accuracy: Optional[float]
    oracle_distribution: Optional[dict[Path, float]]
    forced_accuracy: Optional[dict[Path, float]]
    forced_mean_tokens: Optional[dict[Path, float]]
    routed_accuracy_by_path: dict[Path, float]
    routed_counts: dict[Path, int]
    rule_update_curve: list[tuple[int, int]]
    cache_stats: Optional[dict]
    mean_routing_time: float
    errors: list[dict] = field(default_factory=list)


def _load_ruleset(config: ExperimentConfig) -> RuleSet:
    if config.rules_text is not None:
        return parse_rules(config.rules_text)
    if config.rules_path is not None:
        return parse_rules(FsPath(config.rules_path))
    return load_seed_rules()


def _build_context(config: ExperimentConfig) -> RetrievalContext:
    doc_index = (
        DocIndex.build(load_corpus(config.docs_path))
        if config.docs_path
        else DocIndex.build([])
    )
    table_index = None
    store = None
    if config.tables_manifest:
        store = TableStore.from_manifest(config.tables_manifest)
        table_index = TableIndex(store)
    return RetrievalContext(
        doc_index=doc_index,
        table_index=table_index,
        store=store,
        top_k=config.top_k,
        max_rows=config.max_rows,
    )


def _load_replay(config: ExperimentConfig) -> ReplayClient:
    if config.replay_fixture is not None:
        from .synthetic import fixture_by_key

        return ReplayClient(fixture_by_key(config.replay_fixture))
    if config.replay_path:
        return ReplayClient.from_file(config.replay_path)
    raise ConfigError("a replay fixture is required (replay_path or replay_fixture)")


def _resolve_records(config: ExperimentConfig):
    if config.records is not None:
        return list(config.records), list(config.train_records or [])
    if not config.dataset_path:
        raise ConfigError("dataset_path or records required")
    return load_dataset(
        config.dataset_path,
        seed=config.seed,
        eval_n=config.eval_n,
        train_n=config.train_n,
    )


def _answer_one(
    rec: QARecord,
    path: Path,
    context: RetrievalContext,
    client: ReplayClient,
):
    """Gather evidence, build the prompt, and answer one query on one path.

    On retrieval failure the record is marked degraded and the path is
    answered with an empty evidence bundle (replay fixtures still resolve);
    if the client cannot answer that path either, the direct-LLM path is
    used so every query is graded.
    """
    degraded = False
    answer_path = path
    try:
        bundle = gather_evidence(path, rec.question, context)
    except RagRouteError:
        bundle = EvidenceBundle(path=path)
        degraded = True
    prompt = build_prompt(rec.question, bundle)
    try:
        record = answer(prompt, client, query_id=rec.query_id)
    except RagRouteError:
        if answer_path is Path.LLM:
            raise
        answer_path = Path.LLM
        degraded = True
        prompt = build_prompt(rec.question, EvidenceBundle(path=Path.LLM))
        record = answer(prompt, client, query_id=rec.query_id)
    return record, prompt, answer_path, degraded


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    if config.strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {config.strategy!r}")
    eval_records, train_records = _resolve_records(config)
    if not eval_records:
        raise ConfigError("eval set is empty")

    context = _build_context(config)
    client = _load_replay(config)
    ruleset = _load_ruleset(config)

    routed = config.strategy in ("rule_based_static", "route", "route_cached")
    router = None
    update_curve: list[tuple[int, int]] = []
    if routed:
        cache = (
            MetaCache(config.embedding_dim, config.cache_capacity)
            if config.strategy == "route_cached"
            else None
        )
        router = Router(ruleset, cache=cache, tau=config.tau)

    # training phase: refine rules on the train split before evaluation
    if (
        config.strategy in ("route", "route_cached")
        and config.update_mode != "off"
        and train_records
    ):
        loop = UpdateLoop(
            router,
            batch_size=config.batch_size,
            mode=config.update_mode,
            expert_client=config.expert_client,
        )
        for rec in train_records:
            decision = router.route(rec.question)
            record, prompt, _, _ = _answer_one(
                rec, decision.chosen_path, context, client
            )
            loop.add(
                record_outcome(
                    decision,
                    record.answer_text,
                    rec.gold_answers,
                    prompt_tokens=prompt.token_count,
                    completion_tokens=record.completion_tokens,
                )
            )
        update_curve = list(enumerate(loop.versions))

    per_query: list[dict] = []
    errors: list[dict] = []
    routing_times: list[float] = []
    routed_counts = {p: 0 for p in Path}
    routed_correct = {p: 0 for p in Path}
    for rec in eval_records:
        decision: Optional[RoutingDecision] = None
        if routed:
            decision = router.route(rec.question)
            path = decision.chosen_path
            routing_times.append(decision.routing_latency)
        else:
            path = FIXED_PATH_STRATEGIES[config.strategy]
        try:
            record, prompt, answer_path, degraded = _answer_one(
                rec, path, context, client
            )
        except RagRouteError as exc:
            errors.append({"query_id": rec.query_id, "error": str(exc)})
            continue
        em = exact_match(record.answer_text, rec.gold_answers)
        f1 = token_f1(record.answer_text, rec.gold_answers)
        routed_counts[path] += 1
        routed_correct[path] += int(em)
        per_query.append(
            {
                "query_id": rec.query_id,
                "question": rec.question,
                "chosen_path": path.value,
                "answer_path": answer_path.value,
                "degraded": degraded,
                "source": decision.source if decision else "fixed",
                "scores": (
                    {p.value: decision.scores[p] for p in Path} if decision else None
                ),
                "ruleset_version": decision.ruleset_version if decision else None,
                "answer_text": record.answer_text,
                "exact_match": em,
                "f1": round(f1, 10),
                "prompt_tokens": record.prompt_tokens,
            }
        )

    answered = len(per_query)
    if answered == 0:
        raise ConfigError("no query could be answered")
    accuracy = sum(q["exact_match"] for q in per_query) / answered
    f1_mean = sum(q["f1"] for q in per_query) / answered
    token_mean = sum(q["prompt_tokens"] for q in per_query) / answered
    distribution = {p: routed_counts[p] / answered for p in Path}
    metrics = EvalMetrics(
        f1=f1_mean,
        accuracy=accuracy,
        mean_prompt_tokens=token_mean,
        mean_routing_time=(
            sum(routing_times) / len(routing_times) if routing_times else 0.0
        ),
        path_distribution=distribution,
    )

    # forced per-path accuracy / token means and the oracle comparison,
    # computable when the replay fixture covers all four paths
    forced_accuracy = None
    forced_tokens = None
    oracle_accuracy = None
    oracle_distribution = None
    try:
        per_path_answers: dict[tuple[str, Path], str] = {}
        forced_accuracy = {}
        forced_tokens = {}
        for path in Path:
            correct = 0
            tokens = 0
            for rec in eval_records:
                record, prompt, _, _ = _answer_one(rec, path, context, client)
                per_path_answers[(rec.query_id, path)] = record.answer_text
                correct += int(exact_match(record.answer_text, rec.gold_answers))
                tokens += prompt.token_count
            forced_accuracy[path] = correct / len(eval_records)
            forced_tokens[path] = tokens / len(eval_records)
        priority = router.ruleset.priority_order if router else DEFAULT_PRIORITY
        oracle = compute_oracle(per_path_answers, eval_records, priority)
        oracle_accuracy = oracle.accuracy
        oracle_distribution = oracle.distribution()
    except (MissingAnswer, RagRouteError):
        forced_accuracy = None
        forced_tokens = None

    return ExperimentReport(
        strategy=config.strategy,
        metrics=metrics,
        per_query=per_query,
        oracle_accuracy=oracle_accuracy,
        oracle_distribution=oracle_distribution,
        forced_accuracy=forced_accuracy,
        forced_mean_tokens=forced_tokens,
        routed_accuracy_by_path={
            p: (routed_correct[p] / routed_counts[p] if routed_counts[p] else 0.0)
            for p in Path
        },
        routed_counts=routed_counts,
        rule_update_curve=update_curve,
        cache_stats=(
            router.cache.stats.as_dict() if router and router.cache else None
        ),
        mean_routing_time=metrics.mean_routing_time,
        errors=errors,
    )


def emit_report(report: ExperimentReport, out_dir: FsPath | str) -> list[FsPath]:
    """Write the report as a deterministic file set.

    Timing-derived values go to ``timing.json`` only; every other file is
    byte-identical across runs with the same config and seed.
    """
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[FsPath] = []

    def emit(name: str, text: str):
        path = out / name
        path.write_text(text)
        written.append(path)

    metrics = {
        "strategy": report.strategy,
        "f1": round(report.metrics.f1, 10),
        "accuracy": round(report.metrics.accuracy, 10),
        "mean_prompt_tokens": round(report.metrics.mean_prompt_tokens, 10),
        "path_distribution": {
            p.value: round(v, 10) for p, v in report.metrics.path_distribution.items()
        },
        "oracle_accuracy": report.oracle_accuracy,
        "answered": len(report.per_query),
        "errors": len(report.errors),
    }
    emit("metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n")

    emit(
        "decisions.jsonl",
        "".join(json.dumps(row, sort_keys=True) + "\n" for row in report.per_query),
    )

    rows = ["path\tforced_accuracy\tmean_prompt_tokens"]
    if report.forced_accuracy:
        for p in Path:
            rows.append(
                f"{p.value}\t{report.forced_accuracy[p]:.6f}"
                f"\t{report.forced_mean_tokens[p]:.6f}"
            )
    rows.append(
        f"routed:{report.strategy}\t{report.metrics.accuracy:.6f}"
        f"\t{report.metrics.mean_prompt_tokens:.6f}"
    )
    emit("accuracy_vs_tokens.tsv", "\n".join(rows) + "\n")

    rows = ["path\tforced_accuracy\trouted_accuracy\trouted_count"]
    for p in Path:
        forced = (
            f"{report.forced_accuracy[p]:.6f}" if report.forced_accuracy else "NA"
        )
        rows.append(
            f"{p.value}\t{forced}\t{report.routed_accuracy_by_path[p]:.6f}"
            f"\t{report.routed_counts[p]}"
        )
    emit("path_utilization.tsv", "\n".join(rows) + "\n")

    rows = ["path\trouted_fraction\toracle_fraction"]
    for p in Path:
        oracle = (
            f"{report.oracle_distribution[p]:.6f}"
            if report.oracle_distribution
            else "NA"
        )
        rows.append(
            f"{p.value}\t{report.metrics.path_distribution[p]:.6f}\t{oracle}"
        )
    emit("path_distribution.tsv", "\n".join(rows) + "\n")

    rows = ["update_index\truleset_version"]
    for idx, version in report.rule_update_curve:
        rows.append(f"{idx}\t{version}")
    emit("rule_update_curve.tsv", "\n".join(rows) + "\n")

    if report.cache_stats is not None:
        emit(
            "cache_stats.json",
            json.dumps(report.cache_stats, indent=2, sort_keys=True) + "\n",
        )

    timing = {"mean_routing_time": report.mean_routing_time}
    emit("timing.json", json.dumps(timing, indent=2, sort_keys=True) + "\n")

    return written


#: Files in an output directory whose bytes are expected to be reproducible.
DETERMINISTIC_REPORT_FILES = (
    "metrics.json",
    "decisions.jsonl",
    "accuracy_vs_tokens.tsv",
    "path_utilization.tsv",
    "path_distribution.tsv",
    "rule_update_curve.tsv",
    "cache_stats.json",
)
