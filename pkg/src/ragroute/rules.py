"""Rule and rule-set types plus the line-delimited rule-file format.

A rule file is JSON-lines: one header record carrying the version and the
tie-break priority order, then one record per rule with an s-expression
condition string. Parsing followed by serialization round-trips to
semantically identical rules.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace
from pathlib import Path as FsPath
from typing import Iterable, Union

from .conditions import (
    ConditionExpr,
    has_semantic_leaf,
    parse_condition,
    serialize_condition,
)
from .errors import DuplicateRuleId, InvalidPriority, ParseError
from .paths import DEFAULT_PRIORITY, Path, validate_priority

RULE_ORIGINS = ("expert_seed", "evolved")


@dataclass(frozen=True)
class Rule:
    id: str
    description: str
    condition: ConditionExpr
    target_path: Path
    delta: int
    origin: str = "expert_seed"

    def __post_init__(self):
        if self.delta == 0:
            raise ParseError(f"rule {self.id!r} has zero delta")
        if self.origin not in RULE_ORIGINS:
            raise ParseError(f"rule {self.id!r} has unknown origin {self.origin!r}")

    @property
    def needs_judge(self) -> bool:
        return has_semantic_leaf(self.condition)


@dataclass(frozen=True)
class RuleSet:
    version: int
    rules: tuple[Rule, ...]
    priority_order: tuple[Path, ...] = DEFAULT_PRIORITY

    def __post_init__(self):
        if self.version < 0:
            raise ParseError("version must be non-negative")
        try:
            order = validate_priority(self.priority_order)
        except ValueError as exc:
            raise InvalidPriority(str(exc)) from exc
        object.__setattr__(self, "priority_order", order)
        object.__setattr__(self, "rules", tuple(self.rules))
        seen = set()
        for rule in self.rules:
            if rule.id in seen:
                raise DuplicateRuleId(f"duplicate rule id {rule.id!r}")
            seen.add(rule.id)

    def rule_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.rules)

    def bump_version(self, rules: Iterable[Rule] | None = None,
                     priority_order: tuple[Path, ...] | None = None) -> "RuleSet":
        return RuleSet(
            version=self.version + 1,
            rules=tuple(rules) if rules is not None else self.rules,
            priority_order=priority_order or self.priority_order,
        )


def _parse_rule_record(obj: dict, line_no: int) -> Rule:
    try:
        condition = parse_condition(obj["condition"])
        return Rule(
            id=str(obj["id"]),
            description=str(obj.get("description", "")),
            condition=condition,
            target_path=Path(obj["path"]),
            delta=int(obj["delta"]),
            origin=obj.get("origin", "expert_seed"),
        )
    except ParseError as exc:
        raise ParseError(exc.reason, line=line_no) from exc
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"malformed rule record: {exc}", line=line_no) from exc


def parse_rules(source: Union[str, FsPath, io.TextIOBase]) -> RuleSet:
    """Parse a rule document (text, path, or open file) into a RuleSet."""
    if isinstance(source, FsPath):
        text = source.read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = source

    version = 0
    priority = DEFAULT_PRIORITY
    rules: list[Rule] = []
    saw_header = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", line=line_no) from exc
        kind = obj.get("record")
        if kind == "header":
            if saw_header:
                raise ParseError("duplicate header record", line=line_no)
            saw_header = True
            version = int(obj.get("version", 0))
            if "priority_order" in obj:
                try:
                    priority = validate_priority(
                        Path(p) for p in obj["priority_order"]
                    )
                except ValueError as exc:
                    raise InvalidPriority(str(exc), line=line_no) from exc
        elif kind == "rule":
            rules.append(_parse_rule_record(obj, line_no))
        else:
            raise ParseError(f"unknown record type {kind!r}", line=line_no)
    return RuleSet(version=version, rules=tuple(rules), priority_order=priority)


def serialize_rules(ruleset: RuleSet) -> str:
    """Render a RuleSet back to the rule-file format."""
    lines = [
        json.dumps(
            {
                "record": "header",
                "version": ruleset.version,
                "priority_order": [p.value for p in ruleset.priority_order],
            }
        )
    ]
    for rule in ruleset.rules:
        lines.append(
            json.dumps(
                {
                    "record": "rule",
                    "id": rule.id,
                    "description": rule.description,
                    "condition": serialize_condition(rule.condition),
                    "path": rule.target_path.value,
                    "delta": rule.delta,
                    "origin": rule.origin,
                }
            )
        )
    return "\n".join(lines) + "\n"


def load_seed_rules() -> RuleSet:
    """The shipped expert-seeded rule set."""
    from importlib import resources

    with resources.files("ragroute.assets").joinpath("seed_rules.jsonl").open() as fh:
        return parse_rules(fh.read())


def with_rule_removed(ruleset: RuleSet, rule_id: str) -> RuleSet:
    return replace(ruleset, rules=tuple(r for r in ruleset.rules if r.id != rule_id))
