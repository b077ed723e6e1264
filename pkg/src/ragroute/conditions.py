"""Condition expression trees for routing rules.

Conditions are written as s-expressions, e.g.::

    (and (flag has_numeric_request) (not (kw "define")))

Leaf kinds: ``kw`` (any keyword/phrase present), ``pattern`` (regex over the
normalized text), ``flag`` (named feature flag), ``sem`` (natural-language
predicate resolved by a judge client). Combinators: ``and``, ``or``, ``not``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import JudgeError, JudgeUnavailable, ParseError
from .features import FEATURE_FLAGS, QueryFeatures, contains_phrase

MAX_DEPTH = 8

#: A judge resolves a natural-language predicate against the raw query text.
JudgeClient = Callable[[str, str], bool]


@dataclass(frozen=True)
class KeywordAny:
    keywords: tuple[str, ...]


@dataclass(frozen=True)
class PatternMatch:
    pattern: str


@dataclass(frozen=True)
class FeatureFlag:
    name: str


@dataclass(frozen=True)
class SemanticPredicate:
    description: str


@dataclass(frozen=True)
class And:
    children: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class Not:
    child: "ConditionExpr"


ConditionExpr = (
    KeywordAny | PatternMatch | FeatureFlag | SemanticPredicate | And | Or | Not
)

_LEXER = re.compile(r'\(|\)|"(?:[^"\\]|\\.)*"|[^\s()"]+')


def _lex(source: str) -> list[str]:
    tokens = _LEXER.findall(source)
    rebuilt = re.sub(r"\s+", "", "".join(tokens))
    if rebuilt != re.sub(r"\s+", "", source):
        raise ParseError(f"unexpected characters in condition: {source!r}")
    return tokens


def _unquote(token: str) -> str:
    body = token[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _parse_tokens(tokens: list[str], pos: int, depth: int):
    if depth > MAX_DEPTH:
        raise ParseError(f"condition tree exceeds depth {MAX_DEPTH}")
    if pos >= len(tokens):
        raise ParseError("unexpected end of condition")
    if tokens[pos] != "(":
        raise ParseError(f"expected '(' at token {pos}: {tokens[pos]!r}")
    pos += 1
    if pos >= len(tokens):
        raise ParseError("unexpected end of condition")
    head = tokens[pos]
    pos += 1

    if head in ("and", "or", "not"):
        children = []
        while pos < len(tokens) and tokens[pos] == "(":
            child, pos = _parse_tokens(tokens, pos, depth + 1)
            children.append(child)
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ParseError(f"missing ')' in ({head} ...)")
        pos += 1
        if not children:
            raise ParseError(f"({head}) requires at least one child")
        if head == "not":
            if len(children) != 1:
                raise ParseError("(not ...) takes exactly one child")
            return Not(children[0]), pos
        cls = And if head == "and" else Or
        return cls(tuple(children)), pos

    args = []
    while pos < len(tokens) and tokens[pos] not in ("(", ")"):
        args.append(tokens[pos])
        pos += 1
    if pos >= len(tokens) or tokens[pos] != ")":
        raise ParseError(f"missing ')' in ({head} ...)")
    pos += 1

    if head == "kw":
        if not args or not all(a.startswith('"') for a in args):
            raise ParseError("(kw ...) takes one or more quoted strings")
        return KeywordAny(tuple(_unquote(a) for a in args)), pos
    if head == "pattern":
        if len(args) != 1 or not args[0].startswith('"'):
            raise ParseError("(pattern ...) takes one quoted string")
        pat = _unquote(args[0])
        try:
            re.compile(pat)
        except re.error as exc:
            raise ParseError(f"invalid pattern {pat!r}: {exc}") from exc
        return PatternMatch(pat), pos
    if head == "flag":
        if len(args) != 1 or args[0].startswith('"'):
            raise ParseError("(flag ...) takes one bare flag name")
        if args[0] not in FEATURE_FLAGS:
            raise ParseError(f"unknown feature flag {args[0]!r}")
        return FeatureFlag(args[0]), pos
    if head == "sem":
        if len(args) != 1 or not args[0].startswith('"'):
            raise ParseError("(sem ...) takes one quoted string")
        return SemanticPredicate(_unquote(args[0])), pos
    raise ParseError(f"unknown condition head {head!r}")


def parse_condition(source: str) -> ConditionExpr:
    tokens = _lex(source)
    expr, pos = _parse_tokens(tokens, 0, 1)
    if pos != len(tokens):
        raise ParseError(f"trailing tokens after condition: {tokens[pos:]}")
    return expr


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_condition(expr: ConditionExpr) -> str:
    if isinstance(expr, KeywordAny):
        return "(kw " + " ".join(_quote(k) for k in expr.keywords) + ")"
    if isinstance(expr, PatternMatch):
        return f"(pattern {_quote(expr.pattern)})"
    if isinstance(expr, FeatureFlag):
        return f"(flag {expr.name})"
    if isinstance(expr, SemanticPredicate):
        return f"(sem {_quote(expr.description)})"
    if isinstance(expr, Not):
        return f"(not {serialize_condition(expr.child)})"
    if isinstance(expr, (And, Or)):
        head = "and" if isinstance(expr, And) else "or"
        inner = " ".join(serialize_condition(c) for c in expr.children)
        return f"({head} {inner})"
    raise TypeError(f"not a condition expression: {expr!r}")


def has_semantic_leaf(expr: ConditionExpr) -> bool:
    if isinstance(expr, SemanticPredicate):
        return True
    if isinstance(expr, Not):
        return has_semantic_leaf(expr.child)
    if isinstance(expr, (And, Or)):
        return any(has_semantic_leaf(c) for c in expr.children)
    return False


def evaluate_condition(
    expr: ConditionExpr,
    feats: QueryFeatures,
    judge: Optional[JudgeClient] = None,
    *,
    query_text: str = "",
    _memo: Optional[dict] = None,
) -> bool:
    """Evaluate a condition tree against extracted features.

    Judge-free trees are pure. Semantic leaves resolve via one judge call
    each, memoized per (query, predicate) within a routing call when a shared
    ``_memo`` dict is passed.
    """
    memo = _memo if _memo is not None else {}

    def ev(node: ConditionExpr) -> bool:
        if isinstance(node, KeywordAny):
            return any(
                contains_phrase(feats.normalized_text, k) for k in node.keywords
            )
        if isinstance(node, PatternMatch):
            return re.search(node.pattern, " ".join(feats.normalized_text)) is not None
        if isinstance(node, FeatureFlag):
            return feats.flag(node.name)
        if isinstance(node, SemanticPredicate):
            if judge is None:
                raise JudgeUnavailable(
                    f"semantic predicate {node.description!r} requires a judge"
                )
            key = (query_text, node.description)
            if key not in memo:
                try:
                    memo[key] = bool(judge(node.description, query_text))
                except Exception as exc:
                    raise JudgeError(
                        f"judge failed on {node.description!r}: {exc}"
                    ) from exc
            return memo[key]
        if isinstance(node, Not):
            return not ev(node.child)
        if isinstance(node, And):
            return all(ev(c) for c in node.children)
        if isinstance(node, Or):
            return any(ev(c) for c in node.children)
        raise TypeError(f"not a condition expression: {node!r}")

    return ev(expr)
