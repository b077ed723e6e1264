import json

import pytest
from click.testing import CliRunner

from ragroute.cache import MetaCache
from ragroute.cli import main
from ragroute.dataset import QARecord, load_dataset, write_dataset
from ragroute.embeddings import DEFAULT_DIM, HashingEmbedder, embed
from ragroute.errors import ConfigError, MissingAnswer, SchemaError
from ragroute.evolution import write_outcomes
from ragroute.harness import (
    DETERMINISTIC_REPORT_FILES,
    STRATEGIES,
    ExperimentConfig,
    compute_oracle,
    emit_report,
    run_experiment,
)
from ragroute.paths import DEFAULT_PRIORITY, Path, PathScores
from ragroute.rules import load_seed_rules, serialize_rules
from ragroute.synthetic import (
    make_category_records,
    make_complementarity_fixture,
    write_fixture,
)

# --- dataset -----------------------------------------------------------------


def test_dataset_round_trip(tmp_path):
    records = make_category_records(3)
    f = tmp_path / "data.jsonl"
    write_dataset(records, f)
    loaded, train = load_dataset(f)
    assert loaded == records
    assert train == []


def test_dataset_seeded_split_is_deterministic(tmp_path):
    records = make_category_records(10)
    f = tmp_path / "data.jsonl"
    write_dataset(records, f)
    a_eval, a_train = load_dataset(f, seed=7, eval_n=12, train_n=8)
    b_eval, b_train = load_dataset(f, seed=7, eval_n=12, train_n=8)
    assert a_eval == b_eval and a_train == b_train
    assert len(a_eval) == 12 and len(a_train) == 8
    assert not set(r.query_id for r in a_eval) & set(r.query_id for r in a_train)
    c_eval, _ = load_dataset(f, seed=8, eval_n=12, train_n=8)
    assert c_eval != a_eval


def test_dataset_split_bounds(tmp_path):
    f = tmp_path / "data.jsonl"
    write_dataset(make_category_records(2), f)
    with pytest.raises(SchemaError):
        load_dataset(f, seed=0, eval_n=100)
    with pytest.raises(SchemaError):
        load_dataset(f, seed=0, eval_n=8, train_n=100)


def test_dataset_schema_errors(tmp_path):
    f = tmp_path / "bad.jsonl"
    f.write_text('{"query_id": "q1", "question": "x", "gold_answers": []}\n')
    with pytest.raises(SchemaError):
        load_dataset(f)
    f.write_text("not json\n")
    with pytest.raises(SchemaError):
        load_dataset(f)
    with pytest.raises(SchemaError):
        QARecord(query_id="q", question="x", gold_answers=("a",),
                 category_label="mystery")


# --- oracle ------------------------------------------------------------------


def test_compute_oracle_hand_case():
    records = [
        QARecord(query_id="q1", question="a", gold_answers=("yes",)),
        QARecord(query_id="q2", question="b", gold_answers=("yes",)),
        QARecord(query_id="q3", question="c", gold_answers=("yes",)),
    ]
    answers = {}
    for path in Path:
        answers[("q1", path)] = "no"
    # q2 answerable via Doc and LLM; the oracle prefers Doc (earlier priority)
    for path in Path:
        answers[("q2", path)] = "yes" if path in (Path.Doc, Path.LLM) else "no"
    for path in Path:
        answers[("q3", path)] = "yes" if path is Path.Hybrid else "no"
    oracle = compute_oracle(answers, records, DEFAULT_PRIORITY)
    assert oracle.accuracy == pytest.approx(2 / 3)
    assert oracle.oracle_path["q1"] is Path.DB  # nothing correct, priority head
    assert oracle.oracle_path["q2"] is Path.Doc
    assert oracle.oracle_path["q3"] is Path.Hybrid
    assert oracle.correct_paths["q2"] == frozenset({Path.Doc, Path.LLM})


def test_compute_oracle_requires_full_coverage():
    records = [QARecord(query_id="q1", question="a", gold_answers=("yes",))]
    with pytest.raises(MissingAnswer):
        compute_oracle({("q1", Path.DB): "yes"}, records)


# --- experiments on the complementarity fixture -------------------------------


@pytest.fixture(scope="module")
def comp():
    return make_complementarity_fixture()


def comp_config(comp, strategy, **kw):
    return ExperimentConfig(
        strategy=strategy,
        records=comp.records,
        replay_fixture=comp.fixture,
        **kw,
    )


def test_fixed_path_strategies_match_fixture_profile(comp):
    for strategy, path in (("basic", Path.LLM), ("doc", Path.Doc),
                           ("db", Path.DB), ("hybrid", Path.Hybrid)):
        report = run_experiment(comp_config(comp, strategy))
        assert report.metrics.accuracy == pytest.approx(comp.path_accuracy[path])
        assert report.metrics.path_distribution[path] == 1.0
        assert report.oracle_accuracy == pytest.approx(comp.oracle_accuracy)


def test_routing_beats_every_fixed_path(comp):
    report = run_experiment(comp_config(comp, "route"))
    assert report.metrics.accuracy == pytest.approx(comp.routed_accuracy)
    # one category per path, so utilization splits evenly
    for p in Path:
        assert report.metrics.path_distribution[p] == pytest.approx(0.25)
    assert report.metrics.accuracy > max(report.forced_accuracy.values())
    assert report.metrics.accuracy <= report.oracle_accuracy


def test_cached_routing_matches_uncached_decisions(comp):
    plain = run_experiment(comp_config(comp, "route"))
    cached = run_experiment(comp_config(comp, "route_cached"))
    assert cached.metrics.accuracy == plain.metrics.accuracy
    assert [q["chosen_path"] for q in cached.per_query] == [
        q["chosen_path"] for q in plain.per_query
    ]
    assert cached.cache_stats is not None
    assert plain.cache_stats is None


def test_rule_based_static_equals_route_without_updates(comp):
    static = run_experiment(comp_config(comp, "rule_based_static"))
    route = run_experiment(comp_config(comp, "route"))
    assert static.metrics.accuracy == route.metrics.accuracy


def test_unknown_strategy_rejected(comp):
    with pytest.raises(ConfigError):
        run_experiment(comp_config(comp, "guess"))


def test_empty_eval_set_rejected(comp):
    with pytest.raises(ConfigError):
        run_experiment(
            ExperimentConfig(strategy="route", records=[], replay_fixture=comp.fixture)
        )


def test_replay_fixture_required():
    with pytest.raises(ConfigError):
        run_experiment(
            ExperimentConfig(strategy="route", records=make_category_records(1))
        )


# --- report emission ---------------------------------------------------------


def test_emit_report_deterministic_files(tmp_path, comp):
    small = comp.records[:40]
    config = lambda: ExperimentConfig(
        strategy="route_cached", records=small, replay_fixture=comp.fixture
    )
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    emit_report(run_experiment(config()), dir_a)
    emit_report(run_experiment(config()), dir_b)
    for name in DETERMINISTIC_REPORT_FILES:
        fa, fb = dir_a / name, dir_b / name
        assert fa.exists(), name
        assert fa.read_bytes() == fb.read_bytes(), name
    assert (dir_a / "timing.json").exists()
    assert "timing.json" not in DETERMINISTIC_REPORT_FILES

    metrics = json.loads((dir_a / "metrics.json").read_text())
    assert metrics["strategy"] == "route_cached"
    assert metrics["answered"] == 40
    decisions = [
        json.loads(line)
        for line in (dir_a / "decisions.jsonl").read_text().splitlines()
    ]
    assert len(decisions) == 40
    assert all("chosen_path" in d for d in decisions)
    header = (dir_a / "accuracy_vs_tokens.tsv").read_text().splitlines()[0]
    assert header == "path\tforced_accuracy\tmean_prompt_tokens"


# --- CLI ---------------------------------------------------------------------


@pytest.fixture()
def cli_workspace(tmp_path, comp):
    dataset = tmp_path / "dataset.jsonl"
    write_dataset(comp.records[:40], dataset)
    replay = tmp_path / "replay.jsonl"
    write_fixture(comp.fixture, replay)
    return {"dir": tmp_path, "dataset": dataset, "replay": replay}


def test_cli_run_route(cli_workspace):
    out = cli_workspace["dir"] / "out"
    result = CliRunner().invoke(
        main,
        ["run", "--strategy", "route",
         "--dataset", str(cli_workspace["dataset"]),
         "--replay", str(cli_workspace["replay"]),
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "accuracy=" in result.output
    assert (out / "metrics.json").exists()


def test_cli_run_rejects_bad_strategy(cli_workspace):
    result = CliRunner().invoke(
        main,
        ["run", "--strategy", "nonsense",
         "--dataset", str(cli_workspace["dataset"]),
         "--replay", str(cli_workspace["replay"]),
         "--out", str(cli_workspace["dir"] / "out")],
    )
    assert result.exit_code != 0


def test_cli_index_build(tmp_path):
    docs = tmp_path / "docs.jsonl"
    docs.write_text('{"doc_id": "d1", "text": "interest rate swaps"}\n')
    table = tmp_path / "swaps.csv"
    table.write_text("instrument,year\ninterest rate swaps,2019\n")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps(
        {"tables": [{"table_id": "swaps", "path": "swaps.csv"}]}
    ))
    out = tmp_path / "idx"
    result = CliRunner().invoke(
        main,
        ["index", "build", "--docs", str(docs), "--tables", str(manifest),
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output.strip())
    assert summary["documents"] == 1
    assert summary["tables"] == 1
    assert (out / "doc_index.json").exists()
    assert (out / "table_meta.json").exists()


def test_cli_evolve(tmp_path):
    from tests.test_evolution import doc_outcome, numeric_outcome

    rules = tmp_path / "rules.jsonl"
    rules.write_text(serialize_rules(load_seed_rules()))
    outcomes = tmp_path / "outcomes.jsonl"
    write_outcomes(
        [doc_outcome(i, True) if i % 2 else numeric_outcome(i, False)
         for i in range(10)],
        outcomes,
    )
    out = tmp_path / "updated.jsonl"
    result = CliRunner().invoke(
        main,
        ["evolve", "--outcomes", str(outcomes), "--rules", str(rules),
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    header = json.loads(out.read_text().splitlines()[0])
    assert header["version"] == 1


def test_cli_cache_stats(tmp_path):
    cache = MetaCache(dim=DEFAULT_DIM)
    embedder = HashingEmbedder(DEFAULT_DIM)
    for text, path in (("alpha query", Path.DB), ("bravo query", Path.DB),
                       ("charlie query", Path.Doc)):
        z = embed(text, embedder, DEFAULT_DIM)
        cache.insert(z, PathScores(scores={p: 0 for p in Path}), path)
    snap = tmp_path / "cache.bin"
    cache.save_snapshot(snap)
    result = CliRunner().invoke(main, ["cache", "stats", "--snapshot", str(snap)])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output.strip())
    assert summary["size"] == 3
    assert summary["by_path"] == {"DB": 2, "Doc": 1}


def test_strategy_registry_is_complete():
    assert set(STRATEGIES) == {
        "basic", "doc", "db", "hybrid", "rule_based_static", "route", "route_cached",
    }
