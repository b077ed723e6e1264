"""Command-line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path as FsPath

import click

from .bm25 import DocIndex, load_corpus
from .cache import MetaCache
from .embeddings import DEFAULT_DIM
from .errors import RagRouteError
from .evolution import (
    build_diagnostics,
    read_outcomes,
    update_rules_heuristic,
)
from .harness import STRATEGIES, ExperimentConfig, emit_report, run_experiment
from .rules import parse_rules, serialize_rules
from .tables import TableStore


@click.group()
def main():
    """Rule-driven routing for hybrid-source retrieval-augmented QA."""


@main.group()
def index():
    """Index building."""


@index.command("build")
@click.option("--docs", type=click.Path(exists=True), help="Line-delimited (doc_id, text) corpus.")
@click.option("--tables", type=click.Path(exists=True), help="Table manifest JSON.")
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
def index_build(docs, tables, out):
    """Build and persist retrieval indexes."""
    out_dir = FsPath(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    if docs:
        doc_index = DocIndex.build(load_corpus(docs))
        doc_index.save(out_dir / "doc_index.json")
        summary["documents"] = doc_index.size
    if tables:
        store = TableStore.from_manifest(tables)
        metas = {
            tid: {
                "columns": list(meta.columns),
                "high_freq_values": {
                    k: list(v) for k, v in meta.high_freq_values.items()
                },
                "description": meta.description,
            }
            for tid, meta in sorted(store.metas.items())
        }
        (out_dir / "table_meta.json").write_text(
            json.dumps(metas, indent=2, sort_keys=True) + "\n"
        )
        summary["tables"] = len(store.metas)
        summary["contents_hash"] = store.contents_hash()
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@click.option("--strategy", type=click.Choice(STRATEGIES), required=True)
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--rules", type=click.Path(exists=True), default=None)
@click.option("--docs", type=click.Path(exists=True), default=None)
@click.option("--tables", type=click.Path(exists=True), default=None)
@click.option("--replay", type=click.Path(exists=True), required=True,
              help="Replay fixture of pre-computed answers.")
@click.option("--tau", type=float, default=0.90, show_default=True)
@click.option("--batch-size", type=int, default=50, show_default=True)
@click.option("--update-mode", type=click.Choice(["agent", "heuristic", "off"]),
              default="off", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--eval-n", type=int, default=None)
@click.option("--train-n", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def run(strategy, dataset, rules, docs, tables, replay, tau, batch_size,
        update_mode, seed, eval_n, train_n, out):
    """Run one evaluation strategy and emit report files."""
    config = ExperimentConfig(
        strategy=strategy,
        dataset_path=dataset,
        rules_path=rules,
        docs_path=docs,
        tables_manifest=tables,
        replay_path=replay,
        tau=tau,
        batch_size=batch_size,
        update_mode=update_mode,
        seed=seed,
        eval_n=eval_n,
        train_n=train_n,
    )
    try:
        report = run_experiment(config)
    except RagRouteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    files = emit_report(report, out)
    click.echo(
        f"{strategy}: accuracy={report.metrics.accuracy:.4f} "
        f"f1={report.metrics.f1:.4f} "
        f"mean_tokens={report.metrics.mean_prompt_tokens:.1f}"
    )
    for path in files:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--outcomes", type=click.Path(exists=True), required=True,
              help="Line-delimited graded outcome records.")
@click.option("--rules", "rules_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["heuristic"]), default="heuristic",
              show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the updated rule file here (stdout otherwise).")
def evolve(outcomes, rules_path, mode, out):
    """Apply one offline rule update from recorded outcomes."""
    ruleset = parse_rules(FsPath(rules_path))
    batch = read_outcomes(outcomes)
    try:
        report = build_diagnostics(batch, ruleset)
        updated = update_rules_heuristic(ruleset, report)
    except RagRouteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    text = serialize_rules(updated)
    if out:
        FsPath(out).write_text(text)
        click.echo(f"wrote {out} (version {updated.version})")
    else:
        click.echo(text, nl=False)


@main.group()
def cache():
    """Meta-cache utilities."""


@cache.command("stats")
@click.option("--snapshot", type=click.Path(exists=True), required=True)
@click.option("--dim", type=int, default=DEFAULT_DIM, show_default=True)
def cache_stats(snapshot, dim):
    """Print entry statistics for a cache snapshot file."""
    store = MetaCache(dim=dim)
    try:
        store.load_snapshot(snapshot)
    except RagRouteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    by_path = {}
    for entry in store.entries():
        by_path[entry.chosen_path.value] = by_path.get(entry.chosen_path.value, 0) + 1
    click.echo(
        json.dumps(
            {"size": len(store), "dimension": store.dim, "by_path": by_path},
            sort_keys=True,
        )
    )


if __name__ == "__main__":
    main()
