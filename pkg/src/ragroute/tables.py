"""Table metadata, the embedded relational store, and the read-only
structured-query pipeline.

The query dialect is deliberately small: single-table SELECT with optional
equality/inequality filters and LIMIT. Incoming statements (including
LLM-proposed ones) are parsed into that dialect and re-emitted as a
parameterized statement, so nothing the caller wrote ever executes verbatim.
A sqlite authorizer denies writes as a second line of defense.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import sqlite3
from collections import Counter
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Callable, Optional

from .bm25 import DocIndex
from .errors import (
    ExecutionError,
    HeaderlessTable,
    UnknownColumn,
    UnsafeStatement,
)
from .features import contains_phrase, tokenize

HIGH_FREQ_TOP_N = 5
DEFAULT_MAX_ROWS = 50


@dataclass(frozen=True)
class TableMeta:
    table_id: str
    schema: tuple[tuple[str, str], ...]  # (column name, declared type)
    high_freq_values: dict[str, tuple[str, ...]]
    description: str = ""

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.schema)

    def metadata_text(self) -> str:
        parts = [self.table_id.replace("_", " ")]
        for name, typ in self.schema:
            parts.append(name.replace("_", " "))
            parts.append(typ)
        for col in self.columns:
            parts.extend(self.high_freq_values.get(col, ()))
        if self.description:
            parts.append(self.description)
        return " ".join(parts)


@dataclass(frozen=True)
class FactRecord:
    table_id: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    rendered: str
    truncated: bool = False


def render_fact(
    table_id: str,
    columns: tuple[str, ...],
    rows: tuple[tuple, ...],
    truncated: bool,
    max_rows: int,
) -> str:
    lines = [" | ".join(columns)]
    if not rows:
        lines.append("(no rows)")
    for row in rows:
        lines.append(" | ".join(str(v) for v in row))
    if truncated:
        lines.append(f"... (truncated at {max_rows} rows)")
    return "\n".join(lines)


def make_fact_record(
    table_id: str,
    columns: tuple[str, ...],
    rows: tuple[tuple, ...],
    truncated: bool = False,
    max_rows: int = DEFAULT_MAX_ROWS,
) -> FactRecord:
    return FactRecord(
        table_id=table_id,
        columns=columns,
        rows=rows,
        rendered=render_fact(table_id, columns, rows, truncated, max_rows),
        truncated=truncated,
    )


# --- type inference for delimited files ---

_INT_RE = re.compile(r"^[+-]?\d+$")
_REAL_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


def _infer_type(values: list[str]) -> str:
    non_empty = [v for v in values if v != ""]
    if not non_empty:
        return "TEXT"
    if all(_INT_RE.match(v) for v in non_empty):
        return "INTEGER"
    if all(_REAL_RE.match(v) for v in non_empty):
        return "REAL"
    return "TEXT"


def _coerce(value: str, typ: str):
    if value == "":
        return None
    if typ == "INTEGER":
        return int(value)
    if typ == "REAL":
        return float(value)
    return value


# --- read-only dialect parsing ---

_WRITE_KEYWORDS = re.compile(
    r"\b(insert|update|delete|drop|create|alter|truncate|replace|merge|attach"
    r"|detach|pragma|grant|revoke|exec|execute|call|vacuum|reindex|copy|load"
    r"|begin|commit|rollback|savepoint|union|join)\b",
    re.IGNORECASE,
)
_COMMENT = re.compile(r"(--|/\*|\*/|#)")

_SELECT_RE = re.compile(
    r'^\s*select\s+(?P<cols>\*|[\w"\s,]+?)\s+from\s+(?P<table>"[^"]+"|\w+)'
    r"(?:\s+where\s+(?P<where>.+?))?"
    r"(?:\s+limit\s+(?P<limit>\d+))?\s*;?\s*$",
    re.IGNORECASE | re.DOTALL,
)
_CLAUSE_RE = re.compile(
    r'^\s*(?P<col>"[^"]+"|\w+)\s*(?P<op><=|>=|!=|<>|=|<|>)\s*'
    r"(?P<value>'(?:[^']|'')*'|[+-]?(?:\d+\.?\d*|\.\d+))\s*$"
)

_ALLOWED_OPS = ("<=", ">=", "!=", "<>", "=", "<", ">")


@dataclass(frozen=True)
class ParsedQuery:
    table_id: str
    columns: tuple[str, ...]  # empty means all columns
    filters: tuple[tuple[str, str, object], ...]
    limit: Optional[int]


def _unquote_ident(token: str) -> str:
    token = token.strip()
    if token.startswith('"') and token.endswith('"'):
        return token[1:-1]
    return token


def validate_statement(statement: str, meta: TableMeta) -> ParsedQuery:
    """Parse a statement against the dialect and a table's schema.

    Raises UnsafeStatement for anything that is not a single read-only
    SELECT in the dialect, and UnknownColumn for unknown column references.
    """
    body = statement.strip()
    if not body:
        raise UnsafeStatement("empty statement")
    if _COMMENT.search(body):
        raise UnsafeStatement("comments are not allowed")
    stripped = body[:-1] if body.endswith(";") else body
    if ";" in stripped:
        raise UnsafeStatement("multiple statements are not allowed")
    if _WRITE_KEYWORDS.search(_strip_string_literals(body)):
        raise UnsafeStatement("statement contains a non-read-only keyword")
    match = _SELECT_RE.match(body)
    if not match:
        raise UnsafeStatement(f"statement is outside the read-only dialect: {body!r}")

    table_id = _unquote_ident(match.group("table"))
    if table_id != meta.table_id:
        raise UnknownColumn(
            f"statement targets table {table_id!r}, expected {meta.table_id!r}"
        )

    known = set(meta.columns)
    cols_raw = match.group("cols").strip()
    if cols_raw == "*":
        columns: tuple[str, ...] = ()
    else:
        columns = tuple(_unquote_ident(c) for c in cols_raw.split(","))
        for col in columns:
            if col not in known:
                raise UnknownColumn(f"unknown column {col!r}")

    filters = []
    where = match.group("where")
    if where:
        for clause in re.split(r"\s+and\s+", where, flags=re.IGNORECASE):
            cm = _CLAUSE_RE.match(clause)
            if not cm:
                raise UnsafeStatement(f"unsupported filter clause: {clause!r}")
            col = _unquote_ident(cm.group("col"))
            if col not in known:
                raise UnknownColumn(f"unknown column {col!r}")
            raw = cm.group("value")
            if raw.startswith("'"):
                value: object = raw[1:-1].replace("''", "'")
            elif re.match(r"^[+-]?\d+$", raw):
                value = int(raw)
            else:
                value = float(raw)
            op = cm.group("op")
            if op == "<>":
                op = "!="
            filters.append((col, op, value))

    limit = int(match.group("limit")) if match.group("limit") else None
    return ParsedQuery(
        table_id=table_id,
        columns=columns,
        filters=tuple(filters),
        limit=limit,
    )


def _strip_string_literals(sql: str) -> str:
    return re.sub(r"'(?:[^']|'')*'", "''", sql)


def _qident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


class TableStore:
    """In-memory sqlite store loaded from delimited text files."""

    def __init__(self):
        self._conn = sqlite3.connect(":memory:", check_same_thread=False)
        self.metas: dict[str, TableMeta] = {}

    @classmethod
    def from_manifest(
        cls,
        manifest_path: FsPath | str,
        description_client: Optional[Callable[[str], str]] = None,
    ) -> "TableStore":
        """Manifest maps table_id -> file path and optional description."""
        manifest_path = FsPath(manifest_path)
        manifest = json.loads(manifest_path.read_text())
        store = cls()
        for entry in manifest["tables"]:
            path = manifest_path.parent / entry["path"]
            store.add_table(
                entry["table_id"],
                path,
                description=entry.get("description", ""),
                description_client=description_client,
            )
        return store

    def add_table(
        self,
        table_id: str,
        path: FsPath | str,
        description: str = "",
        description_client: Optional[Callable[[str], str]] = None,
    ) -> TableMeta:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
        if not rows or not rows[0] or not any(c.strip() for c in rows[0]):
            raise HeaderlessTable(f"table {table_id!r} has no header row")
        header = [c.strip() for c in rows[0]]
        data = rows[1:]

        col_values = [[r[i] if i < len(r) else "" for r in data] for i in range(len(header))]
        types = [_infer_type(vals) for vals in col_values]

        ddl_cols = ", ".join(
            f"{_qident(c)} {t}" for c, t in zip(header, types)
        )
        self._conn.execute(f"CREATE TABLE {_qident(table_id)} ({ddl_cols})")
        placeholders = ", ".join("?" for _ in header)
        self._conn.executemany(
            f"INSERT INTO {_qident(table_id)} VALUES ({placeholders})",
            [
                tuple(_coerce(r[i] if i < len(r) else "", types[i]) for i in range(len(header)))
                for r in data
            ],
        )
        self._conn.commit()

        freq: dict[str, tuple[str, ...]] = {}
        for col, vals in zip(header, col_values):
            counts = Counter(v for v in vals if v != "")
            top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
            freq[col] = tuple(v for v, _ in top[:HIGH_FREQ_TOP_N])

        if not description and description_client is not None:
            description = description_client(
                f"table {table_id} columns {', '.join(header)}"
            )
        meta = TableMeta(
            table_id=table_id,
            schema=tuple(zip(header, types)),
            high_freq_values=freq,
            description=description,
        )
        self.metas[table_id] = meta
        return meta

    def contents_hash(self) -> str:
        """Stable hash over all table contents, for mutation checks."""
        digest = hashlib.sha256()
        for table_id in sorted(self.metas):
            digest.update(table_id.encode())
            cur = self._conn.execute(f"SELECT * FROM {_qident(table_id)}")
            for row in cur.fetchall():
                digest.update(repr(row).encode())
        return digest.hexdigest()

    def execute(self, parsed: ParsedQuery, max_rows: int = DEFAULT_MAX_ROWS) -> FactRecord:
        """Run a validated query, capped at max_rows with a truncation marker."""
        meta = self.metas.get(parsed.table_id)
        if meta is None:
            raise ExecutionError(f"unknown table {parsed.table_id!r}")
        cols = parsed.columns or meta.columns
        select_cols = ", ".join(_qident(c) for c in cols)
        sql = f"SELECT {select_cols} FROM {_qident(parsed.table_id)}"
        params: list = []
        if parsed.filters:
            clauses = []
            for col, op, value in parsed.filters:
                if op not in _ALLOWED_OPS:
                    raise UnsafeStatement(f"operator {op!r} not allowed")
                clauses.append(f"{_qident(col)} {op} ?")
                params.append(value)
            sql += " WHERE " + " AND ".join(clauses)
        cap = max_rows if parsed.limit is None else min(parsed.limit, max_rows)
        sql += f" LIMIT {cap + 1}"

        def _authorize(action, *_args):
            allowed = (
                sqlite3.SQLITE_SELECT,
                sqlite3.SQLITE_READ,
                getattr(sqlite3, "SQLITE_FUNCTION", 31),
            )
            if action in allowed:
                return sqlite3.SQLITE_OK
            return sqlite3.SQLITE_DENY

        self._conn.set_authorizer(_authorize)
        try:
            cur = self._conn.execute(sql, params)
            fetched = cur.fetchall()
        except sqlite3.Error as exc:
            raise ExecutionError(str(exc)) from exc
        finally:
            # set_authorizer(None) fails to clear on some Python versions;
            # install an allow-all callback instead.
            self._conn.set_authorizer(lambda *args: sqlite3.SQLITE_OK)

        # An explicit LIMIT within the row cap is a requested bound, not a
        # truncation; the marker flags only the max_rows safety cap.
        truncated = len(fetched) > cap and (
            parsed.limit is None or parsed.limit > cap
        )
        rows = tuple(tuple(r) for r in fetched[:cap])
        return make_fact_record(
            parsed.table_id, tuple(cols), rows, truncated=truncated, max_rows=cap
        )


class TableIndex:
    """Sparse retrieval over per-table metadata documents."""

    def __init__(self, store: TableStore):
        self.store = store
        self._index = DocIndex.build(
            (table_id, meta.metadata_text())
            for table_id, meta in sorted(store.metas.items())
        )

    def retrieve(self, query: str, k: int) -> list[TableMeta]:
        return [
            self.store.metas[p.doc_id] for p in self._index.retrieve(query, k)
        ]


STRUCTURED_QUERY_PROMPT = (
    "You translate a question into one read-only SELECT statement over a "
    "single table. Use only the listed columns, optional equality or "
    "comparison filters, and LIMIT. Return the statement only.\n"
    "Table: {table_id}\nColumns: {columns}\nFrequent values: {values}\n"
    "Question: {question}"
)


def generate_structured_query(
    query: str,
    table: TableMeta,
    client: Optional[Callable[[str], str]] = None,
    max_rows: int = DEFAULT_MAX_ROWS,
) -> str:
    """Produce a validated read-only statement for one table.

    With a client, the client's proposal is validated against the schema.
    Without one, a template emits a full-row selection filtered by any query
    terms exactly matching frequent values, else an uncapped-free full read
    bounded by the row limit.
    """
    if client is not None:
        prompt = STRUCTURED_QUERY_PROMPT.format(
            table_id=table.table_id,
            columns=", ".join(f"{n} ({t})" for n, t in table.schema),
            values=json.dumps(table.high_freq_values, sort_keys=True),
            question=query,
        )
        proposal = client(prompt)
        validate_statement(proposal, table)
        return proposal

    tokens = tokenize(query)
    types = dict(table.schema)
    filters = []
    for col in table.columns:
        for value in table.high_freq_values.get(col, ()):
            if contains_phrase(tokens, value):
                if types[col] in ("INTEGER", "REAL") and _REAL_RE.match(value):
                    literal = value
                else:
                    literal = "'" + value.replace("'", "''") + "'"
                filters.append(f"{_qident(col)} = {literal}")
                break
    # No explicit LIMIT: the executor's max_rows cap applies and marks
    # truncation when the table is larger.
    base = f"SELECT * FROM {_qident(table.table_id)}"
    if filters:
        statement = f"{base} WHERE {' AND '.join(filters)}"
    else:
        statement = base
    validate_statement(statement, table)
    return statement


def execute_structured_query(
    statement: str,
    store: TableStore,
    table: TableMeta,
    max_rows: int = DEFAULT_MAX_ROWS,
) -> FactRecord:
    """Validate then execute; unvalidated text never reaches the store."""
    parsed = validate_statement(statement, table)
    return store.execute(parsed, max_rows=max_rows)
