"""Rule refinement from batched QA-outcome diagnostics.

Outcomes accumulate per batch; each batch is summarized into a four-part
diagnostics report (queries, rule-set snapshot, path-level stats, rule-level
stats). Updates then go through either an expert-agent client that returns a
full replacement rule document, or a deterministic reweighting heuristic.
Invalid proposals never become active.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

from .errors import (
    DegenerateReport,
    EmptyBatch,
    ExpertClientError,
    InvalidProposedRules,
    ParseError,
)
from .metrics import exact_match
from .paths import Path
from .router import Router, RoutingDecision
from .rules import Rule, RuleSet, parse_rules, serialize_rules

logger = logging.getLogger(__name__)

#: Expert client contract: (rule document text, report text) -> rule document.
ExpertClient = Callable[[str, str], str]

DELTA_CAP = 5
ACCURACY_BAND = 0.10
DEFAULT_MIN_TRIGGERS = 5
DEFAULT_MIN_REPORT_TRIGGERS = 10


@dataclass(frozen=True)
class OutcomeRecord:
    query_id: str
    query_text: str
    decision: RoutingDecision
    predicted_answer: str
    gold_answers: tuple[str, ...]
    correct: bool
    prompt_tokens: int = 0
    completion_tokens: int = 0
    answer_latency: float = 0.0


@dataclass(frozen=True)
class PathStat:
    path: Path
    selected_count: int
    correct_count: int

    @property
    def accuracy(self) -> float:
        return self.correct_count / self.selected_count if self.selected_count else 0.0


@dataclass(frozen=True)
class RuleStat:
    rule_id: str
    trigger_count: int
    correct_when_triggered: int

    @property
    def accuracy_when_triggered(self) -> float:
        return (
            self.correct_when_triggered / self.trigger_count
            if self.trigger_count
            else 0.0
        )


@dataclass(frozen=True)
class DiagnosticsReport:
    queries: tuple[tuple[str, Path, bool], ...]
    ruleset: RuleSet
    path_stats: dict[Path, PathStat]
    rule_stats: dict[str, RuleStat]
    batch_index: int

    @property
    def batch_accuracy(self) -> float:
        if not self.queries:
            return 0.0
        return sum(1 for _, _, c in self.queries if c) / len(self.queries)


def record_outcome(
    decision: RoutingDecision,
    predicted: str,
    golds: Sequence[str],
    prompt_tokens: int = 0,
    completion_tokens: int = 0,
    latency: float = 0.0,
) -> OutcomeRecord:
    """Grade one answer against its golds and package the routing context."""
    return OutcomeRecord(
        query_id=decision.query_id,
        query_text=decision.query_text,
        decision=decision,
        predicted_answer=predicted,
        gold_answers=tuple(golds),
        correct=exact_match(predicted, golds),
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        answer_latency=latency,
    )


def build_diagnostics(
    batch: Sequence[OutcomeRecord], ruleset: RuleSet, batch_index: int = 0
) -> DiagnosticsReport:
    if not batch:
        raise EmptyBatch("diagnostics require a non-empty batch")
    path_sel = {p: 0 for p in Path}
    path_ok = {p: 0 for p in Path}
    rule_trig = {r.id: 0 for r in ruleset.rules}
    rule_ok = {r.id: 0 for r in ruleset.rules}
    queries = []
    for rec in batch:
        path = rec.decision.chosen_path
        path_sel[path] += 1
        path_ok[path] += int(rec.correct)
        for fired in rec.decision.scores.fired_rules:
            if fired.rule_id in rule_trig:
                rule_trig[fired.rule_id] += 1
                rule_ok[fired.rule_id] += int(rec.correct)
        queries.append((rec.query_text, path, rec.correct))
    return DiagnosticsReport(
        queries=tuple(queries),
        ruleset=ruleset,
        path_stats={
            p: PathStat(p, path_sel[p], path_ok[p]) for p in Path
        },
        rule_stats={
            rid: RuleStat(rid, rule_trig[rid], rule_ok[rid]) for rid in rule_trig
        },
        batch_index=batch_index,
    )


def render_report(report: DiagnosticsReport) -> str:
    """Deterministic plain-text rendering; this exact text is what the expert
    client receives."""
    lines = [f"== Routing diagnostics, batch {report.batch_index} =="]
    lines.append("")
    lines.append("(i) Queries:")
    for text, path, correct in report.queries:
        mark = "correct" if correct else "wrong"
        lines.append(f"  - [{path.value}] [{mark}] {text}")
    lines.append("")
    lines.append("(ii) Current rule set:")
    for raw in serialize_rules(report.ruleset).strip().splitlines():
        lines.append(f"  {raw}")
    lines.append("")
    lines.append("(iii) Path-level statistics:")
    for p in Path:
        st = report.path_stats[p]
        lines.append(
            f"  - {p.value}: selected={st.selected_count} "
            f"correct={st.correct_count} accuracy={st.accuracy:.4f}"
        )
    lines.append("")
    lines.append("(iv) Rule-level statistics:")
    for rule in report.ruleset.rules:
        st = report.rule_stats[rule.id]
        lines.append(
            f"  - {rule.id}: triggered={st.trigger_count} "
            f"correct={st.correct_when_triggered} "
            f"accuracy={st.accuracy_when_triggered:.4f}"
        )
    lines.append("")
    lines.append(f"Overall batch accuracy: {report.batch_accuracy:.4f}")
    return "\n".join(lines) + "\n"


def update_rules_agent(
    ruleset: RuleSet, report: DiagnosticsReport, client: ExpertClient
) -> RuleSet:
    """Ask the expert client for a full replacement rule document.

    The proposal is parsed and validated as a whole; on any failure the
    current rule set is retained and InvalidProposedRules raised."""
    try:
        proposal = client(serialize_rules(ruleset), render_report(report))
    except Exception as exc:
        raise ExpertClientError(f"expert client failed: {exc}") from exc
    try:
        parsed = parse_rules(proposal)
    except ParseError as exc:
        raise InvalidProposedRules(f"rejected proposal: {exc}") from exc
    if parsed.priority_order != ruleset.priority_order:
        logger.info(
            "expert proposal changes priority order to %s",
            [p.value for p in parsed.priority_order],
        )
    return RuleSet(
        version=ruleset.version + 1,
        rules=parsed.rules,
        priority_order=parsed.priority_order,
    )


def update_rules_heuristic(
    ruleset: RuleSet,
    report: DiagnosticsReport,
    min_triggers: int = DEFAULT_MIN_TRIGGERS,
    min_report_triggers: int = DEFAULT_MIN_REPORT_TRIGGERS,
) -> RuleSet:
    """Deterministic fallback: reweight rules by trigger accuracy.

    Rules triggered often enough move one delta step toward or away from the
    cap depending on whether their trigger accuracy beats or trails the batch
    accuracy by the band; rules reaching delta 0 are removed. Only reweights
    and removals, never new rules.
    """
    total_triggers = sum(st.trigger_count for st in report.rule_stats.values())
    if total_triggers < min_report_triggers:
        raise DegenerateReport(
            f"only {total_triggers} rule triggers in batch "
            f"(minimum {min_report_triggers})"
        )
    overall = report.batch_accuracy
    new_rules: list[Rule] = []
    for rule in ruleset.rules:
        st = report.rule_stats.get(rule.id)
        delta = rule.delta
        if st is not None and st.trigger_count >= min_triggers:
            acc = st.accuracy_when_triggered
            if acc >= overall + ACCURACY_BAND:
                delta = min(delta + 1, DELTA_CAP)
            elif acc <= overall - ACCURACY_BAND:
                delta = delta - 1
        if delta == 0:
            logger.info("heuristic update removes rule %s", rule.id)
            continue
        if delta != rule.delta:
            new_rules.append(replace(rule, delta=delta, origin="evolved"))
        else:
            new_rules.append(rule)
    return ruleset.bump_version(rules=new_rules)


class UpdateLoop:
    """Drives periodic rule updates over a stream of graded outcomes.

    After every ``batch_size`` outcomes one update executes and the router
    atomically swaps to the new rule set (which invalidates the meta-cache on
    version change). Mode ``off`` disables updates. Failed updates are logged
    and the prior rule set retained.
    """

    def __init__(
        self,
        router: Router,
        batch_size: int,
        mode: str = "heuristic",
        expert_client: Optional[ExpertClient] = None,
        min_triggers: int = DEFAULT_MIN_TRIGGERS,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if mode not in ("agent", "heuristic", "off"):
            raise ValueError(f"unknown update mode {mode!r}")
        if mode == "agent" and expert_client is None:
            raise ValueError("agent mode requires an expert client")
        self.router = router
        self.batch_size = batch_size
        self.mode = mode
        self.expert_client = expert_client
        self.min_triggers = min_triggers
        self.versions: list[int] = [router.ruleset.version]
        self._buffer: list[OutcomeRecord] = []
        self._batch_index = 0

    def add(self, outcome: OutcomeRecord) -> Optional[RuleSet]:
        """Record one outcome; returns the new rule set when an update fires."""
        if self.mode == "off":
            return None
        self._buffer.append(outcome)
        if len(self._buffer) < self.batch_size:
            return None
        batch, self._buffer = self._buffer, []
        report = build_diagnostics(batch, self.router.ruleset, self._batch_index)
        self._batch_index += 1
        try:
            if self.mode == "agent":
                updated = update_rules_agent(
                    self.router.ruleset, report, self.expert_client
                )
            else:
                updated = update_rules_heuristic(
                    self.router.ruleset, report, min_triggers=self.min_triggers
                )
        except (ExpertClientError, InvalidProposedRules, DegenerateReport) as exc:
            logger.warning("rule update skipped: %s", exc)
            return None
        self.router.set_ruleset(updated)
        self.versions.append(updated.version)
        return updated


# --- outcome persistence (line-delimited records for the harness/CLI) ---

def outcome_to_record(outcome: OutcomeRecord) -> dict:
    rec = outcome.decision.as_record()
    rec.update(
        {
            "predicted_answer": outcome.predicted_answer,
            "gold_answers": list(outcome.gold_answers),
            "correct": outcome.correct,
            "prompt_tokens": outcome.prompt_tokens,
            "completion_tokens": outcome.completion_tokens,
        }
    )
    return rec


def outcome_from_record(rec: dict) -> OutcomeRecord:
    from .paths import FiredRule, PathScores

    decision = RoutingDecision(
        query_id=rec["query_id"],
        query_text=rec["query_text"],
        scores=PathScores(
            scores={Path(k): int(v) for k, v in rec["scores"].items()},
            fired_rules=tuple(
                FiredRule(rid, Path(p), int(d)) for rid, p, d in rec["fired_rules"]
            ),
        ),
        chosen_path=Path(rec["chosen_path"]),
        source=rec["source"],
        cache_similarity=rec.get("cache_similarity"),
        ruleset_version=int(rec["ruleset_version"]),
        routing_latency=0.0,
        cache_degraded=rec.get("cache_degraded", False),
    )
    return OutcomeRecord(
        query_id=rec["query_id"],
        query_text=rec["query_text"],
        decision=decision,
        predicted_answer=rec["predicted_answer"],
        gold_answers=tuple(rec["gold_answers"]),
        correct=bool(rec["correct"]),
        prompt_tokens=int(rec.get("prompt_tokens", 0)),
        completion_tokens=int(rec.get("completion_tokens", 0)),
    )


def write_outcomes(outcomes: Iterable[OutcomeRecord], path) -> None:
    with open(path, "w") as fh:
        for o in outcomes:
            fh.write(json.dumps(outcome_to_record(o)) + "\n")


def read_outcomes(path) -> list[OutcomeRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(outcome_from_record(json.loads(line)))
    return out
