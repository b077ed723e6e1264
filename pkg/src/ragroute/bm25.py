"""Inverted-index BM25 retrieval over passages.

Parameters k1=1.2, b=0.75; tokenization is lowercase split on
non-alphanumerics with no stemming. Ranking ties break by doc_id ascending,
so repeated retrieval over an unchanged index is deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Iterable

from .errors import DuplicateDocId
from .features import tokenize

K1 = 1.2
B = 0.75


@dataclass(frozen=True)
class Passage:
    doc_id: str
    text: str
    retrieval_score: float = 0.0


class DocIndex:
    def __init__(self):
        self.texts: dict[str, str] = {}
        self.doc_len: dict[str, int] = {}
        # term -> {doc_id: term frequency}
        self.postings: dict[str, dict[str, int]] = {}
        self.avgdl = 0.0

    @property
    def size(self) -> int:
        return len(self.texts)

    @classmethod
    def build(cls, corpus: Iterable[tuple[str, str]]) -> "DocIndex":
        index = cls()
        for doc_id, text in corpus:
            index._add(doc_id, text)
        index._finalize()
        return index

    def _add(self, doc_id: str, text: str):
        if doc_id in self.texts:
            raise DuplicateDocId(f"duplicate doc_id {doc_id!r}")
        tokens = tokenize(text)
        self.texts[doc_id] = text
        self.doc_len[doc_id] = len(tokens)
        for term in tokens:
            self.postings.setdefault(term, {})
            self.postings[term][doc_id] = self.postings[term].get(doc_id, 0) + 1

    def _finalize(self):
        if self.texts:
            self.avgdl = sum(self.doc_len.values()) / len(self.texts)

    def _idf(self, term: str) -> float:
        df = len(self.postings.get(term, {}))
        n = len(self.texts)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, query: str, doc_id: str) -> float:
        """BM25 score of one document for a query (0 for unknown documents)."""
        if doc_id not in self.texts:
            return 0.0
        dl = self.doc_len[doc_id]
        total = 0.0
        for term in tokenize(query):
            tf = self.postings.get(term, {}).get(doc_id, 0)
            if tf == 0:
                continue
            idf = self._idf(term)
            denom = tf + K1 * (1.0 - B + B * dl / self.avgdl)
            total += idf * tf * (K1 + 1.0) / denom
        return total

    def retrieve(self, query: str, k: int) -> list[Passage]:
        """Top-k passages by BM25 score, descending; ties by doc_id ascending.

        Only documents sharing at least one term with the query are candidates.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        candidates: set[str] = set()
        for term in set(tokenize(query)):
            candidates.update(self.postings.get(term, {}))
        scored = [(self.score(query, d), d) for d in candidates]
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [
            Passage(doc_id=d, text=self.texts[d], retrieval_score=s)
            for s, d in scored[:k]
        ]

    # --- persistence ---

    def to_json(self) -> str:
        return json.dumps(
            {"texts": self.texts},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, data: str) -> "DocIndex":
        obj = json.loads(data)
        return cls.build(sorted(obj["texts"].items()))

    def save(self, path: FsPath | str) -> None:
        FsPath(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: FsPath | str) -> "DocIndex":
        return cls.from_json(FsPath(path).read_text())


def load_corpus(path: FsPath | str) -> list[tuple[str, str]]:
    """Read a line-delimited (doc_id, text) corpus file."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append((str(rec["doc_id"]), str(rec["text"])))
    return out
