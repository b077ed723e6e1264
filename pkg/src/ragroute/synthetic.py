"""Synthetic workload builders for experiments and verification.

These construct category-labeled query sets together with replay fixtures
whose per-path correctness profile is known exactly, so routed accuracy,
oracle accuracy, and update behavior can be checked against hand-computed
numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dataset import QARecord
from .paths import Path

#: Which augmentation path each query category is aligned with.
CATEGORY_PATH = {
    "numeric": Path.DB,
    "how_why": Path.Doc,
    "definition": Path.LLM,
    "fact_plus_explanation": Path.Hybrid,
}

_NAMES = [
    a + b
    for a in ("al", "bri", "cor", "del", "el", "for", "gam", "hol", "ir", "jun")
    for b in ("pha", "dor", "mont", "vex", "lune", "tor", "bex", "nor", "quim", "sol")
]

_TERMS = [
    f"{a} {b}"
    for a in (
        "deferred", "accrued", "intangible", "residual", "amortized",
        "consolidated", "contingent", "restricted", "pledged", "hedged",
    )
    for b in (
        "goodwill", "revenue", "liability", "collateral", "surplus",
        "allowance", "premium", "reserve", "impairment", "leasehold",
    )
]


def _question(category: str, i: int) -> str:
    name = _NAMES[i % len(_NAMES)]
    year = 1990 + i % 30
    pct = 2 + i % 7
    if category == "numeric":
        return f"What was the total revenue in {year} for segment {name}?"
    if category == "how_why":
        return f"Why did segment {name} margins decline under the revised plan?"
    if category == "definition":
        return f"What is {_TERMS[i % len(_TERMS)]}?"
    if category == "fact_plus_explanation":
        return (
            f"Explain why operating income moved {pct} percent in {year} "
            f"for unit {name}."
        )
    raise ValueError(category)


def make_category_records(n_per_category: int, prefix: str = "syn") -> list[QARecord]:
    """n queries per category, each constructed to fire exactly one seed rule."""
    records = []
    for category in CATEGORY_PATH:
        for i in range(n_per_category):
            question = _question(category, i)
            records.append(
                QARecord(
                    query_id=f"{prefix}_{category}_{i}",
                    question=question,
                    gold_answers=(f"gold {prefix} {category} {i}",),
                    category_label=category,
                )
            )
    return records


def _fixture_record(record: QARecord, path: Path, correct: bool) -> dict:
    return {
        "query_id": record.query_id,
        "path": path.value,
        "answer_text": record.gold_answers[0] if correct else "no answer found",
        "prompt_tokens": 0,
        "completion_tokens": 3,
    }


@dataclass(frozen=True)
class ComplementarityFixture:
    """500 queries whose per-path accuracy profile is fixed by construction.

    Per-path correct counts: LLM 25, Doc 50, DB 75, Hybrid 95 (accuracies
    0.05 / 0.10 / 0.15 / 0.19); 132 queries are correct under at least one
    path (oracle accuracy 0.264); routing each category to its aligned path
    answers 120 correctly (accuracy 0.24).
    """

    records: list[QARecord]
    fixture: list[dict]

    oracle_accuracy: float = 132 / 500
    routed_accuracy: float = 120 / 500
    path_accuracy = {
        Path.LLM: 25 / 500,
        Path.Doc: 50 / 500,
        Path.DB: 75 / 500,
        Path.Hybrid: 95 / 500,
    }


def make_complementarity_fixture(prefix: str = "comp") -> ComplementarityFixture:
    records = make_category_records(125, prefix=prefix)
    by_cat: dict[str, list[QARecord]] = {}
    for rec in records:
        by_cat.setdefault(rec.category_label, []).append(rec)

    # index ranges of correct queries per (category, path)
    correct_plan = {
        "numeric": {
            Path.DB: range(0, 55),
            Path.Hybrid: range(0, 55),
            Path.LLM: range(0, 15),
            Path.Doc: range(55, 67),
        },
        "how_why": {
            Path.Doc: range(0, 25),
            Path.Hybrid: range(0, 10),
        },
        "definition": {
            Path.LLM: range(0, 10),
        },
        "fact_plus_explanation": {
            Path.Hybrid: range(0, 30),
            Path.DB: range(0, 20),
            Path.Doc: range(0, 13),
        },
    }

    fixture = []
    for category, recs in by_cat.items():
        plan = correct_plan[category]
        for i, rec in enumerate(recs):
            for path in Path:
                correct = i in plan.get(path, ())
                fixture.append(_fixture_record(rec, path, correct))
    return ComplementarityFixture(records=records, fixture=fixture)


POISONED_RULES = """\
{"record": "header", "version": 0, "priority_order": ["DB", "Doc", "Hybrid", "LLM"]}
{"record": "rule", "id": "poison_numeric_doc", "description": "Mistakenly sends numeric queries to documents.", "condition": "(flag has_numeric_request)", "path": "Doc", "delta": 1, "origin": "expert_seed"}
{"record": "rule", "id": "howwhy_doc", "description": "How/why questions go to documents.", "condition": "(and (kw \\"how\\" \\"why\\") (not (flag has_numeric_request)))", "path": "Doc", "delta": 3, "origin": "expert_seed"}
"""


@dataclass(frozen=True)
class PoisonedWorkload:
    """Training/holdout split where numeric queries are only answerable via
    DB but a poisoned seed rule routes them to Doc (trigger accuracy 0)."""

    train_records: list[QARecord]
    holdout_records: list[QARecord]
    fixture: list[dict]
    rules_text: str = POISONED_RULES


def make_poisoned_workload(
    n_train_per_cat: int = 50, n_holdout_per_cat: int = 100
) -> PoisonedWorkload:
    def interleaved(n: int, prefix: str) -> list[QARecord]:
        numeric = [
            QARecord(
                query_id=f"{prefix}_numeric_{i}",
                question=_question("numeric", i),
                gold_answers=(f"gold {prefix} numeric {i}",),
                category_label="numeric",
            )
            for i in range(n)
        ]
        how_why = [
            QARecord(
                query_id=f"{prefix}_how_why_{i}",
                question=_question("how_why", i),
                gold_answers=(f"gold {prefix} how why {i}",),
                category_label="how_why",
            )
            for i in range(n)
        ]
        out = []
        for a, b in zip(numeric, how_why):
            out.extend((a, b))
        return out

    train = interleaved(n_train_per_cat, "ptrain")
    holdout = interleaved(n_holdout_per_cat, "phold")
    fixture = []
    for rec in train + holdout:
        aligned = CATEGORY_PATH[rec.category_label]
        for path in Path:
            fixture.append(_fixture_record(rec, path, correct=path is aligned))
    return PoisonedWorkload(
        train_records=train, holdout_records=holdout, fixture=fixture
    )


def write_fixture(fixture: list[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in fixture:
            fh.write(json.dumps(rec) + "\n")


def fixture_by_key(fixture: list[dict]) -> dict[tuple[str, Path], dict]:
    return {(rec["query_id"], Path(rec["path"])): rec for rec in fixture}
