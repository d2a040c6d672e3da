"""Condition grammar, rule grafting, and the output verification gate."""

import random

import pytest

from crystal.canonical import canonical_dumps
from crystal.errors import (
    ConditionParseError,
    ConflictingRules,
    DuplicateRuleId,
    EmptyRuleSet,
    InvalidRule,
)
from crystal.rules import (
    ActionKind,
    And,
    AtomicRule,
    Comparison,
    Hardness,
    Or,
    RuleAction,
    RuleSet,
    VerdictKind,
    add_rule,
    canonical_condition,
    clause_guard_text,
    condition_slots,
    decompose_clauses,
    evaluate_condition,
    graft,
    parse_condition,
    verify_output,
)


def route(rule_id, condition, label, hardness="Hard"):
    return AtomicRule(
        rule_id=rule_id,
        condition=condition,
        action=RuleAction(kind=ActionKind.ROUTE_TO, label=label),
        hardness=Hardness(hardness),
    )


def forbid(rule_id, condition, tokens, hardness="Hard"):
    return AtomicRule(
        rule_id=rule_id,
        condition=condition,
        action=RuleAction(kind=ActionKind.FORBID_OUTPUT_CONTAINING, tokens=tuple(tokens)),
        hardness=Hardness(hardness),
    )


# ---------------------------------------------------------------- grammar


def test_parse_simple_comparison():
    expr = parse_condition("slot(severity) == 'mild'")
    assert expr == Comparison(slot="severity", op="==", literal="mild")


def test_parse_numeric_literal():
    expr = parse_condition("slot(age) >= 65")
    assert expr == Comparison(slot="age", op=">=", literal=65.0)


def test_and_binds_tighter_than_or():
    expr = parse_condition("slot(a) == 1 or slot(b) == 2 and slot(c) == 3")
    assert isinstance(expr, Or)
    assert expr.items[0] == Comparison("a", "==", 1.0)
    assert isinstance(expr.items[1], And)


def test_parentheses_override_precedence():
    expr = parse_condition("(slot(a) == 1 or slot(b) == 2) and slot(c) == 3")
    assert isinstance(expr, And)
    assert isinstance(expr.items[0], Or)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "   ",
        "slot(a)",
        "slot(a) ==",
        "slot(a) == 'open",
        "slot(a) = 1",
        "slot(a) == 1 and",
        "slot(a) == 1 or or slot(b) == 2",
        "(slot(a) == 1",
        "slot() == 1",
        "== 1",
        "slot(a) == 1 extra",
    ],
)
def test_parse_rejects_malformed_conditions(text):
    with pytest.raises(ConditionParseError):
        parse_condition(text)


def test_canonical_condition_round_trips():
    for text in [
        "slot(severity) == 'mild'",
        "slot(age) >= 65",
        "slot(a) == 1 and slot(b) != 'x'",
        "(slot(a) == 1 or slot(b) == 2) and slot(c) < 3",
        "slot(a) == 1 or slot(b) == 2 and slot(c) == 3",
    ]:
        expr = parse_condition(text)
        canon = canonical_condition(expr)
        assert parse_condition(canon) == expr
        # canonical form is a fixed point
        assert canonical_condition(parse_condition(canon)) == canon


def test_condition_slots_first_appearance_order():
    expr = parse_condition("slot(b) == 1 and slot(a) == 2 and slot(b) == 3")
    assert condition_slots(expr) == ["b", "a"]


def test_decompose_keeps_disjunction_whole():
    expr = parse_condition("slot(a) == 1 and (slot(b) == 2 or slot(c) == 3)")
    clauses = decompose_clauses(expr)
    assert len(clauses) == 2
    assert isinstance(clauses[1], Or)
    assert clause_guard_text(clauses[1]).startswith("(")


# ---------------------------------------------------------------- evaluation oracle

SLOTS = ["a", "b", "c"]
STRINGS = ["mild", "severe", "watch"]
NUMBERS = [0.0, 1.0, 2.5]
OPS = ["==", "!=", "<", "<=", ">", ">="]


def random_expr(rng, depth=0):
    if depth >= 2 or rng.random() < 0.5:
        slot = rng.choice(SLOTS)
        op = rng.choice(OPS)
        if op in ("==", "!=") and rng.random() < 0.5:
            return Comparison(slot, op, rng.choice(STRINGS))
        return Comparison(slot, op, rng.choice(NUMBERS))
    ctor = And if rng.random() < 0.5 else Or
    return ctor(tuple(random_expr(rng, depth + 1) for _ in range(rng.randint(2, 3))))


def render_expr(expr):
    """Independent renderer: every composite child is parenthesized."""
    if isinstance(expr, Comparison):
        lit = f"'{expr.literal}'" if isinstance(expr.literal, str) else repr(expr.literal)
        return f"slot({expr.slot}) {expr.op} {lit}"
    word = " and " if isinstance(expr, And) else " or "
    return word.join(
        part if isinstance(part, str) else part
        for part in (
            render_expr(i) if isinstance(i, Comparison) else f"({render_expr(i)})"
            for i in expr.items
        )
    )


def oracle_eval(expr, slots):
    """Reference semantics: missing slot is false, ordering needs numbers."""
    if isinstance(expr, And):
        return all(oracle_eval(i, slots) for i in expr.items)
    if isinstance(expr, Or):
        return any(oracle_eval(i, slots) for i in expr.items)
    if expr.slot not in slots:
        return False
    value = slots[expr.slot]
    is_num = isinstance(value, (int, float)) and not isinstance(value, bool)
    if expr.op == "==" or expr.op == "!=":
        if isinstance(expr.literal, str):
            eq = value == expr.literal if isinstance(value, str) else False
        else:
            eq = float(value) == expr.literal if is_num else False
        return eq if expr.op == "==" else not eq
    if not is_num or not isinstance(expr.literal, float):
        return False
    table = {
        "<": float(value) < expr.literal,
        "<=": float(value) <= expr.literal,
        ">": float(value) > expr.literal,
        ">=": float(value) >= expr.literal,
    }
    return table[expr.op]


def random_slots(rng):
    slots = {}
    for name in SLOTS:
        roll = rng.random()
        if roll < 0.25:
            continue  # leave the slot unset
        if roll < 0.6:
            slots[name] = rng.choice(STRINGS)
        else:
            slots[name] = rng.choice(NUMBERS + [0.5, 3.0])
    return slots


def test_evaluation_matches_oracle_on_random_expressions():
    rng = random.Random(818)
    for trial in range(400):
        tree = random_expr(rng)
        text = render_expr(tree)
        parsed = parse_condition(text)
        slots = random_slots(rng)
        assert evaluate_condition(parsed, slots) == oracle_eval(tree, slots), (
            f"trial {trial}: {text!r} with {slots!r}"
        )


def test_missing_slot_comparisons_are_false():
    expr = parse_condition("slot(ghost) != 'x'")
    assert evaluate_condition(expr, {}) is False


def test_ordering_on_string_value_is_false():
    expr = parse_condition("slot(a) < 5")
    assert evaluate_condition(expr, {"a": "mild"}) is False


def test_bool_values_are_not_numeric():
    expr = parse_condition("slot(a) == 1")
    assert evaluate_condition(expr, {"a": True}) is False


# ---------------------------------------------------------------- rule objects


def test_rule_dict_round_trip():
    rule = route("r1", "slot(severity) == 'mild'", "rest", hardness="Soft")
    assert AtomicRule.from_dict(rule.to_dict()) == rule
    fb = forbid("r2", "slot(a) == 1", ["dosage"])
    assert AtomicRule.from_dict(fb.to_dict()) == fb


def test_rule_rejects_unknown_fields():
    raw = route("r1", "slot(a) == 1", "x").to_dict()
    raw["priority"] = 3
    with pytest.raises(InvalidRule, match="unknown rule fields"):
        AtomicRule.from_dict(raw)


def test_rule_rejects_unknown_action_kind():
    raw = route("r1", "slot(a) == 1", "x").to_dict()
    raw["action"]["kind"] = "Teleport"
    with pytest.raises(InvalidRule, match="action kind"):
        AtomicRule.from_dict(raw)


def test_forbid_rule_needs_tokens():
    with pytest.raises(InvalidRule, match="token"):
        forbid("r1", "slot(a) == 1", []).check()


def test_route_rule_needs_label():
    bad = AtomicRule(
        rule_id="r1", condition="slot(a) == 1", action=RuleAction(kind=ActionKind.ROUTE_TO)
    )
    with pytest.raises(InvalidRule, match="label"):
        bad.check()


def test_ruleset_rejects_duplicate_ids():
    with pytest.raises(DuplicateRuleId):
        RuleSet(rules=[route("r1", "slot(a) == 1", "x"), route("r1", "slot(a) == 2", "y")])


def test_add_rule_is_pure():
    base = RuleSet(rules=[route("r1", "slot(a) == 1", "x")])
    grown = add_rule(base, route("r2", "slot(a) == 2", "y"))
    assert len(base.rules) == 1
    assert [r.rule_id for r in grown.rules] == ["r1", "r2"]
    with pytest.raises(DuplicateRuleId):
        add_rule(grown, route("r2", "slot(a) == 3", "z"))


# ---------------------------------------------------------------- grafting


def triage_rules():
    return RuleSet(
        rules=[
            route("r1", "slot(symptom) == 'dizziness' and slot(severity) == 'mild'", "rest"),
            route("r2", "slot(symptom) == 'dizziness' and slot(severity) == 'severe'", "refer"),
            route("r3", "slot(symptom) == 'fever'", "clinic visit"),
        ]
    )


def test_graft_shares_clause_prefixes():
    graph = graft(triage_rules())
    # one root branching on symptom, one second-level branch on severity,
    # three terminals
    assert len(graph.roots) == 1
    root = graph.nodes[next(iter(graph.roots))]
    assert root.slot_key == "symptom"
    decisions = [n for n in graph.nodes.values() if n.kind.value == "Decision"]
    terminals = [n for n in graph.nodes.values() if n.kind.value == "Terminal"]
    assert len(decisions) == 2
    assert sorted(t.label for t in terminals) == ["clinic visit", "refer", "rest"]
    assert graph.promoted
    assert graph.validate().is_empty


def test_graft_guards_are_canonical_clauses():
    graph = graft(triage_rules())
    guards = sorted(e.guard for e in graph.edges.values())
    assert guards == [
        "slot(severity) == 'mild'",
        "slot(severity) == 'severe'",
        "slot(symptom) == 'dizziness'",
        "slot(symptom) == 'fever'",
    ]
    assert all(e.confidence == 1.0 for e in graph.edges.values())


def test_graft_reuses_terminal_for_equal_labels():
    rules = RuleSet(
        rules=[
            route("r1", "slot(a) == 1", "same place"),
            route("r2", "slot(a) == 2", "same place"),
        ]
    )
    graph = graft(rules)
    terminals = [n for n in graph.nodes.values() if n.kind.value == "Terminal"]
    assert len(terminals) == 1
    assert len(graph.edges) == 2


def test_graft_multiple_lead_slots_make_multiple_roots():
    rules = RuleSet(
        rules=[route("r1", "slot(a) == 1", "x"), route("r2", "slot(b) == 2", "y")]
    )
    graph = graft(rules)
    assert len(graph.roots) == 2


def test_graft_is_deterministic():
    a = canonical_dumps(graft(triage_rules()).to_dict())
    b = canonical_dumps(graft(triage_rules()).to_dict())
    assert a == b
    assert graft(triage_rules()).graph_id == graft(triage_rules()).graph_id


def test_graft_skips_forbid_rules_but_keeps_them_gating():
    rules = RuleSet(
        rules=[
            route("r1", "slot(a) == 1", "x"),
            forbid("r2", "slot(a) == 1", ["dosage"]),
        ]
    )
    graph = graft(rules)
    labels = {n.label for n in graph.nodes.values()}
    assert "dosage" not in labels
    assert len([n for n in graph.nodes.values() if n.kind.value == "Terminal"]) == 1


def test_graft_conflicting_hard_routes_raise():
    rules = RuleSet(
        rules=[
            route("r1", "slot(a) == 1", "go left"),
            route("r2", "slot(a) == 1", "go right"),
        ]
    )
    with pytest.raises(ConflictingRules) as err:
        graft(rules)
    assert "r1" in str(err.value) and "r2" in str(err.value)


def test_graft_soft_route_does_not_conflict():
    rules = RuleSet(
        rules=[
            route("r1", "slot(a) == 1", "go left"),
            route("r2", "slot(a) == 1", "go right", hardness="Soft"),
        ]
    )
    graph = graft(rules)
    assert len([n for n in graph.nodes.values() if n.kind.value == "Terminal"]) == 2


def test_graft_rejects_empty_and_forbid_only_rulesets():
    with pytest.raises(EmptyRuleSet):
        graft(RuleSet())
    with pytest.raises(EmptyRuleSet):
        graft(RuleSet(rules=[forbid("r1", "slot(a) == 1", ["x"])]))


# ---------------------------------------------------------------- verification gate


def oracle_contains(text, token):
    """Independent whole-token check via padded-space search."""
    import re

    norm = lambda s: " ".join(re.findall(r"[a-z0-9_]+", s.lower()))
    hay = f" {norm(text)} "
    needle = norm(token)
    return bool(needle) and f" {needle} " in hay


def test_verify_blocks_hard_forbid():
    rules = RuleSet(rules=[forbid("r1", "slot(topic) == 'meds'", ["exact dosage"])])
    verdict = verify_output("take the exact dosage now", {"topic": "meds"}, rules)
    assert verdict.kind is VerdictKind.BLOCKED
    assert verdict.rule_ids == ("r1",)
    assert verdict.blocked


def test_verify_passes_when_condition_unsatisfied():
    rules = RuleSet(rules=[forbid("r1", "slot(topic) == 'meds'", ["dosage"])])
    verdict = verify_output("take the dosage now", {"topic": "billing"}, rules)
    assert verdict.kind is VerdictKind.PASS


def test_verify_soft_forbid_warns():
    rules = RuleSet(rules=[forbid("r1", "slot(a) == 1", ["jargon"], hardness="Soft")])
    verdict = verify_output("avoid jargon here", {"a": 1}, rules)
    assert verdict.kind is VerdictKind.PASS_WITH_WARNINGS
    assert verdict.rule_ids == ("r1",)
    assert not verdict.blocked


def test_verify_hard_outranks_soft():
    rules = RuleSet(
        rules=[
            forbid("soft1", "slot(a) == 1", ["jargon"], hardness="Soft"),
            forbid("hard1", "slot(a) == 1", ["dosage"]),
        ]
    )
    verdict = verify_output("jargon and dosage", {"a": 1}, rules)
    assert verdict.kind is VerdictKind.BLOCKED
    assert verdict.rule_ids == ("hard1",)


def test_verify_matches_whole_tokens_only():
    rules = RuleSet(rules=[forbid("r1", "slot(a) == 1", ["dose"])])
    assert verify_output("the dosette box", {"a": 1}, rules).kind is VerdictKind.PASS
    assert verify_output("one dose only", {"a": 1}, rules).kind is VerdictKind.BLOCKED


def test_verify_ignores_routing_rules():
    rules = RuleSet(rules=[route("r1", "slot(a) == 1", "dosage")])
    assert verify_output("dosage talk", {"a": 1}, rules).kind is VerdictKind.PASS


def test_verify_matches_token_oracle_on_fuzzed_text():
    rng = random.Random(4242)
    words = ["dose", "dosage", "exact", "rest", "now", "und", "dosetté"]
    tokens = ["dose", "exact dosage", "rest now"]
    rules = RuleSet(
        rules=[forbid(f"r{i}", "slot(on) == 1", [tok]) for i, tok in enumerate(tokens)]
    )
    for trial in range(300):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 8)))
        verdict = verify_output(text, {"on": 1}, rules)
        expected = [
            f"r{i}" for i, tok in enumerate(tokens) if oracle_contains(text, tok)
        ]
        if expected:
            assert verdict.kind is VerdictKind.BLOCKED, f"trial {trial}: {text!r}"
            assert list(verdict.rule_ids) == expected
        else:
            assert verdict.kind is VerdictKind.PASS, f"trial {trial}: {text!r}"
