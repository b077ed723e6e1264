"""Per-path evidence gathering: passages, database facts, or both."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .bm25 import DocIndex, Passage
from .errors import NoTableFound, RagRouteError
from .paths import Path
from .tables import (
    DEFAULT_MAX_ROWS,
    FactRecord,
    TableIndex,
    TableStore,
    execute_structured_query,
    generate_structured_query,
)

DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class EvidenceBundle:
    path: Path
    passages: tuple[Passage, ...] = ()
    facts: tuple[FactRecord, ...] = ()
    degraded: bool = False

    def __post_init__(self):
        if self.path is Path.Doc and self.facts:
            raise ValueError("Doc bundle must not carry facts")
        if self.path is Path.DB and self.passages:
            raise ValueError("DB bundle must not carry passages")
        if self.path is Path.LLM and (self.passages or self.facts):
            raise ValueError("LLM bundle must be empty")


@dataclass
class RetrievalContext:
    """Built indexes and knobs shared by all evidence gathering."""

    doc_index: DocIndex
    table_index: Optional[TableIndex] = None
    store: Optional[TableStore] = None
    top_k: int = DEFAULT_TOP_K
    table_candidates: int = 1
    max_rows: int = DEFAULT_MAX_ROWS
    sql_client: Optional[Callable[[str], str]] = None

    def db_facts(self, query: str) -> tuple[FactRecord, ...]:
        if self.table_index is None or self.store is None:
            raise NoTableFound("no table index configured")
        tables = self.table_index.retrieve(query, self.table_candidates)
        if not tables:
            raise NoTableFound(f"no table retrieved for query {query!r}")
        facts = []
        for meta in tables:
            statement = generate_structured_query(
                query, meta, client=self.sql_client, max_rows=self.max_rows
            )
            facts.append(
                execute_structured_query(
                    statement, self.store, meta, max_rows=self.max_rows
                )
            )
        return tuple(facts)


def gather_evidence(path: Path, query: str, context: RetrievalContext) -> EvidenceBundle:
    """Collect the evidence a path needs.

    DB failures under Hybrid degrade to passages-only with a flag; DB
    failures on the DB path surface to the caller (the QA pipeline decides
    the fallback).
    """
    if path is Path.LLM:
        return EvidenceBundle(path=path)
    if path is Path.Doc:
        passages = tuple(context.doc_index.retrieve(query, context.top_k))
        return EvidenceBundle(path=path, passages=passages)
    if path is Path.DB:
        return EvidenceBundle(path=path, facts=context.db_facts(query))
    # Hybrid
    passages = tuple(context.doc_index.retrieve(query, context.top_k))
    try:
        facts = context.db_facts(query)
        return EvidenceBundle(path=path, passages=passages, facts=facts)
    except RagRouteError:
        return EvidenceBundle(path=path, passages=passages, degraded=True)
