"""QA dataset records and loading."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Optional, Sequence

from .errors import SchemaError

CATEGORY_LABELS = (
    "numeric",
    "how_why",
    "definition",
    "fact_plus_explanation",
    "other",
)


@dataclass(frozen=True)
class QARecord:
    query_id: str
    question: str
    gold_answers: tuple[str, ...]
    doc_refs: tuple[str, ...] = ()
    table_refs: tuple[str, ...] = ()
    category_label: Optional[str] = None

    def __post_init__(self):
        if not self.gold_answers:
            raise SchemaError(f"record {self.query_id!r} has no gold answers")
        if self.category_label is not None and self.category_label not in CATEGORY_LABELS:
            raise SchemaError(
                f"record {self.query_id!r} has unknown category "
                f"{self.category_label!r}"
            )


def record_from_dict(obj: dict, index: int) -> QARecord:
    try:
        return QARecord(
            query_id=str(obj["query_id"]),
            question=str(obj["question"]),
            gold_answers=tuple(str(g) for g in obj["gold_answers"]),
            doc_refs=tuple(obj.get("doc_refs", ())),
            table_refs=tuple(obj.get("table_refs", ())),
            category_label=obj.get("category_label"),
        )
    except SchemaError:
        raise
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"record {index}: {exc}") from exc


def load_dataset(
    path: FsPath | str,
    seed: Optional[int] = None,
    eval_n: Optional[int] = None,
    train_n: Optional[int] = None,
) -> tuple[list[QARecord], list[QARecord]]:
    """Load records and optionally split a seeded (eval, train) subsample.

    Without ``eval_n`` the whole file becomes the eval set and the train set
    is empty.
    """
    records: list[QARecord] = []
    with open(path) as fh:
        for index, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"record {index}: invalid JSON ({exc})") from exc
            records.append(record_from_dict(obj, index))

    if eval_n is None:
        return records, []
    if eval_n > len(records):
        raise SchemaError(
            f"eval_n={eval_n} exceeds dataset size {len(records)}"
        )
    rng = random.Random(seed)
    order = list(range(len(records)))
    rng.shuffle(order)
    eval_records = [records[i] for i in sorted(order[:eval_n])]
    rest = order[eval_n:]
    train_records = []
    if train_n:
        if train_n > len(rest):
            raise SchemaError(
                f"train_n={train_n} exceeds remaining records ({len(rest)})"
            )
        train_records = [records[i] for i in sorted(rest[:train_n])]
    return eval_records, train_records


def write_dataset(records: Sequence[QARecord], path: FsPath | str) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "query_id": rec.query_id,
                        "question": rec.question,
                        "gold_answers": list(rec.gold_answers),
                        "doc_refs": list(rec.doc_refs),
                        "table_refs": list(rec.table_refs),
                        "category_label": rec.category_label,
                    }
                )
                + "\n"
            )
