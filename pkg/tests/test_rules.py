import json

import pytest

from ragroute.errors import DuplicateRuleId, InvalidPriority, ParseError
from ragroute.paths import DEFAULT_PRIORITY, Path
from ragroute.rules import (
    Rule,
    RuleSet,
    load_seed_rules,
    parse_rules,
    serialize_rules,
    with_rule_removed,
)
from ragroute.conditions import parse_condition

HEADER = json.dumps(
    {"record": "header", "version": 3, "priority_order": ["Doc", "DB", "Hybrid", "LLM"]}
)
RULE_LINE = json.dumps(
    {
        "record": "rule",
        "id": "r1",
        "description": "numeric goes to the database",
        "condition": "(flag has_numeric_request)",
        "path": "DB",
        "delta": 2,
        "origin": "evolved",
    }
)


def test_parse_header_and_rule():
    rs = parse_rules(HEADER + "\n" + RULE_LINE + "\n")
    assert rs.version == 3
    assert rs.priority_order == (Path.Doc, Path.DB, Path.Hybrid, Path.LLM)
    assert rs.rules[0].id == "r1"
    assert rs.rules[0].delta == 2
    assert rs.rules[0].origin == "evolved"


def test_headerless_document_gets_defaults():
    rs = parse_rules(RULE_LINE)
    assert rs.version == 0
    assert rs.priority_order == DEFAULT_PRIORITY


def test_round_trip_serialization():
    rs = parse_rules(HEADER + "\n" + RULE_LINE)
    assert parse_rules(serialize_rules(rs)) == rs


def test_parse_from_path(tmp_path):
    p = tmp_path / "rules.jsonl"
    p.write_text(HEADER + "\n" + RULE_LINE + "\n")
    assert parse_rules(p) == parse_rules(p.read_text())


def test_blank_and_comment_lines_ignored():
    rs = parse_rules("# comment\n\n" + RULE_LINE + "\n\n")
    assert len(rs.rules) == 1


def test_duplicate_rule_id_rejected():
    with pytest.raises(DuplicateRuleId):
        parse_rules(RULE_LINE + "\n" + RULE_LINE)


def test_bad_priority_rejected():
    header = json.dumps(
        {"record": "header", "version": 1, "priority_order": ["DB", "DB", "Hybrid", "LLM"]}
    )
    with pytest.raises(InvalidPriority):
        parse_rules(header)


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as exc:
        parse_rules(HEADER + "\nnot json")
    assert exc.value.line == 2


def test_zero_delta_rejected():
    bad = json.loads(RULE_LINE)
    bad["delta"] = 0
    with pytest.raises(ParseError):
        parse_rules(json.dumps(bad))


def test_unknown_origin_rejected():
    bad = json.loads(RULE_LINE)
    bad["origin"] = "folklore"
    with pytest.raises(ParseError):
        parse_rules(json.dumps(bad))


def test_bad_condition_reports_line():
    bad = json.loads(RULE_LINE)
    bad["condition"] = "(flag nope)"
    with pytest.raises(ParseError) as exc:
        parse_rules(HEADER + "\n" + json.dumps(bad))
    assert exc.value.line == 2


def test_bump_version():
    rs = parse_rules(RULE_LINE)
    bumped = rs.bump_version()
    assert bumped.version == rs.version + 1
    assert bumped.rules == rs.rules


def test_with_rule_removed():
    rs = parse_rules(RULE_LINE)
    assert with_rule_removed(rs, "r1").rules == ()
    assert with_rule_removed(rs, "absent") == rs


def test_seed_rules_shape(seed_rules):
    assert seed_rules.version == 0
    assert seed_rules.priority_order == DEFAULT_PRIORITY
    assert len(seed_rules.rules) == 4
    assert {r.target_path for r in seed_rules.rules} == set(Path)
    assert all(r.origin == "expert_seed" for r in seed_rules.rules)
    assert all(r.delta == 3 for r in seed_rules.rules)
    assert not any(r.needs_judge for r in seed_rules.rules)


def test_needs_judge_flag():
    rule = Rule(
        id="sem1",
        description="",
        condition=parse_condition('(sem "asks about policy")'),
        target_path=Path.Doc,
        delta=1,
        origin="evolved",
    )
    assert rule.needs_judge


def test_ruleset_rejects_negative_version():
    with pytest.raises(ParseError):
        RuleSet(version=-1, rules=())
