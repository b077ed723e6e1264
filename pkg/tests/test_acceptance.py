"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Every expected number here was computed by hand or by an independent oracle
implementation before being asserted against the package.
"""

import json
import random
import time

import numpy as np
import pytest
from click.testing import CliRunner

from ragroute.cache import MetaCache
from ragroute.cli import main as cli_main
from ragroute.dataset import write_dataset
from ragroute.embeddings import DEFAULT_DIM, HashingEmbedder, cosine, embed
from ragroute.errors import UnknownColumn, UnsafeStatement
from ragroute.evidence import RetrievalContext, gather_evidence
from ragroute.harness import DETERMINISTIC_REPORT_FILES, ExperimentConfig, run_experiment
from ragroute.metrics import exact_match, token_f1
from ragroute.paths import Path
from ragroute.qa import build_prompt
from ragroute.router import Router
from ragroute.rules import load_seed_rules
from ragroute.synthetic import (
    CATEGORY_PATH,
    make_category_records,
    make_complementarity_fixture,
    write_fixture,
)
from ragroute.tables import validate_statement

from tests.test_retrieval import make_corpus, oracle_bm25


def _report(num: int, desc: str, ok: bool):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {num:02d} {status} - {desc}")
    assert ok, f"criterion {num:02d} failed: {desc}"


@pytest.fixture(scope="module")
def comp():
    return make_complementarity_fixture()


# 1 ---------------------------------------------------------------------------


def test_criterion_01_routing_correctness():
    records = make_category_records(100)
    router = Router(load_seed_rules())
    start = time.perf_counter()
    aligned = sum(
        router.route(rec.question).chosen_path is CATEGORY_PATH[rec.category_label]
        for rec in records
    )
    elapsed = time.perf_counter() - start
    ok = aligned == 400 and elapsed < 5.0
    _report(
        1,
        f"routed 400-query synthetic workload, {aligned}/400 aligned "
        f"in {elapsed:.2f}s (< 5s)",
        ok,
    )


# 2 ---------------------------------------------------------------------------


def test_criterion_02_complementarity(comp):
    report = run_experiment(
        ExperimentConfig(strategy="route", records=comp.records,
                         replay_fixture=comp.fixture)
    )
    routed = report.metrics.accuracy
    forced = report.forced_accuracy
    profile_ok = all(
        forced[p] == pytest.approx(comp.path_accuracy[p]) for p in Path
    )
    ok = (
        profile_ok
        and routed > max(forced.values())
        and routed <= report.oracle_accuracy
    )
    _report(
        2,
        f"routed {routed:.3f} > best single path "
        f"{max(forced.values()):.3f}, <= oracle {report.oracle_accuracy:.3f} "
        "(single-path profile 0.05/0.10/0.15/0.19)",
        ok,
    )


# 3 ---------------------------------------------------------------------------


def _distinct_queries(n: int) -> list[str]:
    """Queries whose hashing embeddings are pairwise non-identical."""
    embedder = HashingEmbedder(DEFAULT_DIM)
    queries, vecs = [], []
    i = 0
    while len(queries) < n:
        q = f"What was the total revenue in {1000 + i} for segment s{i}?"
        z = embed(q, embedder, DEFAULT_DIM)
        if all(cosine(z, v) < 1.0 for v in vecs):
            queries.append(q)
            vecs.append(z)
        i += 1
    return queries


class _DelayedRouter(Router):
    def _score(self, query_text, ruleset):
        time.sleep(0.010)
        return super()._score(query_text, ruleset)


def test_criterion_03_cache_replay():
    queries = _distinct_queries(500)
    router = Router(load_seed_rules(), cache=MetaCache(DEFAULT_DIM), tau=1.0)
    first = [router.route(q) for q in queries]
    second = [router.route(q) for q in queries]
    identical = all(
        a.chosen_path is b.chosen_path and a.scores.scores == b.scores.scores
        for a, b in zip(first, second)
    )
    invocations_ok = router.scorer_invocations == 500
    all_hits = all(d.source == "cache_hit" for d in second)

    delayed = _DelayedRouter(load_seed_rules(), cache=MetaCache(DEFAULT_DIM), tau=1.0)
    mean_first = sum(delayed.route(q).routing_latency for q in queries) / 500
    mean_second = sum(delayed.route(q).routing_latency for q in queries) / 500
    timing_ok = mean_second <= 0.10 * mean_first

    ok = identical and invocations_ok and all_hits and timing_ok
    _report(
        3,
        f"500x2 replay at tau=1.0: {router.scorer_invocations} scorer calls, "
        f"decisions identical={identical}, delayed-stub second-pass mean "
        f"{mean_second * 1000:.2f}ms <= 10% of first-pass "
        f"{mean_first * 1000:.2f}ms",
        ok,
    )


# 4 ---------------------------------------------------------------------------


def test_criterion_04_cache_maximality():
    rng = np.random.default_rng(12345)
    dim = 32
    cache = MetaCache(dim=dim, capacity=2000)
    entries = rng.normal(size=(1000, dim))
    entries /= np.linalg.norm(entries, axis=1, keepdims=True)
    scores = {p: 0 for p in Path}
    from ragroute.paths import PathScores

    for v in entries:
        cache.insert(v, PathScores(scores=scores), Path.DB)
    taus = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99]
    failures = 0
    stored = cache.entries()
    for i in range(1000):
        probe = rng.normal(size=dim)
        probe /= np.linalg.norm(probe)
        tau = taus[i % len(taus)]
        sims = [float(np.dot(e.embedding, probe)) for e in stored]
        best = max(range(1000), key=lambda j: sims[j])
        result = cache.lookup(probe, tau=tau)
        if sims[best] >= tau:
            if (
                result is None
                or result[0] is not stored[best]
                or abs(result[1] - sims[best]) > 1e-9
                or result[1] < tau
            ):
                failures += 1
        elif result is not None:
            failures += 1
    _report(
        4,
        f"1000 random probes vs brute-force scan: {1000 - failures}/1000 "
        "argmax matches, all hits >= tau",
        failures == 0,
    )


# 5 ---------------------------------------------------------------------------


def test_criterion_05_rule_update_improvement():
    from ragroute.synthetic import make_poisoned_workload

    workload = make_poisoned_workload(n_train_per_cat=50, n_holdout_per_cat=100)

    def holdout_accuracy(update_mode, batch_size):
        report = run_experiment(
            ExperimentConfig(
                strategy="route",
                records=workload.holdout_records,
                train_records=workload.train_records,
                rules_text=workload.rules_text,
                replay_fixture=workload.fixture,
                update_mode=update_mode,
                batch_size=batch_size,
            )
        )
        return report.metrics.accuracy

    off = holdout_accuracy("off", 100)
    updated = holdout_accuracy("heuristic", 100)
    sweep = {b: holdout_accuracy("heuristic", b) for b in (25, 50, 100)}
    ok = (updated - off) >= 0.20 and all(acc >= off for acc in sweep.values())
    _report(
        5,
        f"poisoned rule: off={off:.2f}, one batch-100 heuristic update -> "
        f"{updated:.2f} (+{(updated - off) * 100:.0f}pp >= 20pp); sweep "
        + ", ".join(f"b{b}={a:.2f}" for b, a in sorted(sweep.items()))
        + " all >= off",
        ok,
    )


# 6 ---------------------------------------------------------------------------


def test_criterion_06_bm25_oracle_equivalence():
    from ragroute.bm25 import DocIndex

    corpus = make_corpus(18)  # plus two tie documents -> 20 total
    index = DocIndex.build(corpus)
    queries = ["revenue swap hedge", "goodwill", "cash tax debt", "income lease"]
    max_err = 0.0
    order_ok = True
    for q in queries:
        expected = oracle_bm25(corpus, q)
        for doc_id, score in expected.items():
            max_err = max(max_err, abs(index.score(q, doc_id) - score))
        ranked = sorted(
            ((d, s) for d, s in expected.items() if s > 0),
            key=lambda item: (-item[1], item[0]),
        )
        got = index.retrieve(q, k=len(ranked) or 1)
        order_ok = order_ok and [p.doc_id for p in got] == [d for d, _ in ranked]
    ok = max_err <= 1e-9 and order_ok
    _report(
        6,
        f"BM25 vs independent oracle on {len(corpus)}-doc corpus: max score "
        f"error {max_err:.2e} <= 1e-9, tie ordering matches",
        ok,
    )


# 7 ---------------------------------------------------------------------------


def test_criterion_07_metric_oracles():
    gold = ["494 million"]
    cases = [
        exact_match("494 million", gold) is True,
        exact_match("2,763", gold) is False,
        exact_match("The $494 Million", gold) is True,
        exact_match("494", gold) is False,
        exact_match("Q4 net income.", ["q4 net income"]) is True,
        token_f1("494 million", ["494"]) == pytest.approx(2 / 3),
        token_f1("494 494", ["494"]) == pytest.approx(2 / 3),
        token_f1("total revenue", gold) == 0.0,
        token_f1("the", ["a"]) == 1.0,
        token_f1("494", ["2763", "494"]) == 1.0,
    ]
    _report(
        7,
        f"{sum(cases)}/10 hand-computed metric cases reproduced "
        "(incl. 494-million EM true, 2,763 EM false)",
        all(cases),
    )


# 8 ---------------------------------------------------------------------------


def test_criterion_08_token_cost_ordering(
    tmp_path, comp, case_doc_index, case_table_index, case_store
):
    # per-query ordering with real retrieved evidence
    ctx = RetrievalContext(
        doc_index=case_doc_index, table_index=case_table_index, store=case_store
    )
    evidence_queries = [
        "What was the 2019 carrying amount of interest rate swaps?",
        "Why did interest expenses rise during 2019?",
        "cross currency swaps hedging note",
    ]
    per_query_ok = True
    for q in evidence_queries:
        tokens = {
            p: build_prompt(q, gather_evidence(p, q, ctx)).token_count for p in Path
        }
        per_query_ok = per_query_ok and tokens[Path.Hybrid] >= max(
            tokens[Path.Doc], tokens[Path.DB]
        )

    # every fixture query, answered through the harness pipeline
    report = run_experiment(
        ExperimentConfig(strategy="route", records=comp.records,
                         replay_fixture=comp.fixture)
    )
    from ragroute.harness import emit_report

    emit_report(report, tmp_path)
    rows = (tmp_path / "accuracy_vs_tokens.tsv").read_text().splitlines()[1:]
    mean_tokens = {}
    for row in rows:
        name, _, tokens = row.split("\t")
        if name in ("DB", "Doc", "Hybrid", "LLM"):
            mean_tokens[name] = float(tokens)
    table_ok = mean_tokens["Hybrid"] == max(mean_tokens.values())
    forced_ok = report.forced_mean_tokens[Path.Hybrid] >= max(
        report.forced_mean_tokens[Path.Doc], report.forced_mean_tokens[Path.DB]
    )
    ok = per_query_ok and table_ok and forced_ok
    _report(
        8,
        "Hybrid prompt tokens >= max(Doc, DB) on every query; emitted "
        f"accuracy-vs-tokens table has Hybrid highest mean ({mean_tokens['Hybrid']:.1f})",
        ok,
    )


# 9 ---------------------------------------------------------------------------


def test_criterion_09_run_determinism(tmp_path, comp):
    dataset = tmp_path / "dataset.jsonl"
    write_dataset(comp.records, dataset)
    replay = tmp_path / "replay.jsonl"
    write_fixture(comp.fixture, replay)
    runner = CliRunner()
    outputs = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        result = runner.invoke(
            cli_main,
            ["run", "--strategy", "route_cached",
             "--dataset", str(dataset), "--replay", str(replay),
             "--seed", "0", "--eval-n", "200", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        outputs.append(out)
    identical = all(
        (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
        for name in DETERMINISTIC_REPORT_FILES
    )
    _report(
        9,
        f"two identical `run` invocations byte-identical across "
        f"{len(DETERMINISTIC_REPORT_FILES)} report files (timing excluded)",
        identical,
    )


# 10 --------------------------------------------------------------------------


def _fuzzed_write_statements(n=100):
    rng = random.Random(987)
    tables = ["derivative_instruments", "other", "sqlite_master"]
    payloads = [
        "INSERT INTO {t} VALUES ('x', 1, 2)",
        "UPDATE {t} SET carrying_amount = 0",
        "DELETE FROM {t}",
        "DROP TABLE {t}",
        "CREATE TABLE {t}2 (x)",
        "ALTER TABLE {t} ADD COLUMN y",
        "TRUNCATE TABLE {t}",
        "REPLACE INTO {t} VALUES (1)",
        "PRAGMA writable_schema = 1",
        "ATTACH DATABASE ':memory:' AS x",
        "SELECT * FROM {t}; DROP TABLE {t}",
        "SELECT * FROM {t} -- ; DELETE FROM {t}",
        "SELECT * FROM {t} /* hidden */ ",
        "SELECT * FROM {t} UNION SELECT * FROM sqlite_master",
        "SELECT * FROM {t} JOIN sqlite_master ON 1=1",
        "BEGIN; DELETE FROM {t}; COMMIT",
        "VACUUM",
    ]
    statements = []
    while len(statements) < n:
        stmt = rng.choice(payloads).format(t=rng.choice(tables))
        # random casing and whitespace noise
        stmt = "".join(c.upper() if rng.random() < 0.5 else c.lower() for c in stmt)
        if rng.random() < 0.5:
            stmt = "  " + stmt.replace(" ", "  ", 1)
        statements.append(stmt)
    return statements


def test_criterion_10_safety(case_store):
    meta = case_store.metas["derivative_instruments"]
    before = case_store.contents_hash()
    rejected = 0
    statements = _fuzzed_write_statements(100)
    for stmt in statements:
        try:
            validate_statement(stmt, meta)
        except (UnsafeStatement, UnknownColumn):
            rejected += 1
    unchanged = case_store.contents_hash() == before
    ok = rejected == len(statements) and unchanged
    _report(
        10,
        f"{rejected}/{len(statements)} fuzzed write statements rejected "
        f"before execution; store contents hash unchanged={unchanged}",
        ok,
    )
