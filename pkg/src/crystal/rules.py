"""Human-prescribed rules: a tiny condition grammar, structural grafting of
rules into a traversable graph, and the verification channel that gates
generated text.

Condition grammar: expr := clause {("and"|"or") clause}; clause :=
"slot(" name ")" op literal | "(" expr ")"; op in {==, !=, <, <=, >, >=};
literals are quoted strings or decimal numbers; "and" binds tighter than
"or". Comparing a missing slot is false; ordering ops need numeric operands.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

from .canonical import checksum_of
from .errors import (
    ConditionParseError,
    ConflictingRules,
    DuplicateRuleId,
    EmptyRuleSet,
    InvalidRule,
)
from .graph import CanvasGraph, ChainEdge, ChainNode, EdgeStatus, NodeKind, SupportSet

# -- condition expressions -------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    slot: str
    op: str
    literal: Union[str, float]


@dataclass(frozen=True)
class And:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Expr", ...]


Expr = Union[Comparison, And, Or]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|<=|>=|<|>)"
    r"|(?P<lparen>\()"
    r"|(?P<rparen>\))"
    r"|(?P<string>'[^']*'|\"[^\"]*\")"
    r"|(?P<number>-?\d+(?:\.\d+)?))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            remainder = text[pos:].lstrip()
            if not remainder:
                break
            col = len(text) - len(remainder) + 1
            raise ConditionParseError(f"unexpected character {remainder[0]!r}", col=col)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind) + 1))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str, int]:
        token = self.peek()
        if token is None:
            raise ConditionParseError("unexpected end of condition", col=len(self.text) + 1)
        self.pos += 1
        return token

    def expect(self, kind: str, text: str | None = None) -> tuple[str, str, int]:
        token = self.take()
        if token[0] != kind or (text is not None and token[1] != text):
            wanted = text or kind
            raise ConditionParseError(f"expected {wanted}, got {token[1]!r}", col=token[2])
        return token

    def parse(self) -> Expr:
        expr = self.parse_or()
        leftover = self.peek()
        if leftover is not None:
            raise ConditionParseError(f"trailing input {leftover[1]!r}", col=leftover[2])
        return expr

    def parse_or(self) -> Expr:
        items = [self.parse_and()]
        while True:
            token = self.peek()
            if token is not None and token[0] == "name" and token[1] == "or":
                self.take()
                items.append(self.parse_and())
            else:
                break
        return items[0] if len(items) == 1 else Or(items=tuple(items))

    def parse_and(self) -> Expr:
        items = [self.parse_clause()]
        while True:
            token = self.peek()
            if token is not None and token[0] == "name" and token[1] == "and":
                self.take()
                items.append(self.parse_clause())
            else:
                break
        if len(items) == 1:
            return items[0]
        # flatten nested conjunctions so prefix decomposition sees every clause
        flat: list[Expr] = []
        for item in items:
            flat.extend(item.items) if isinstance(item, And) else flat.append(item)
        return And(items=tuple(flat))

    def parse_clause(self) -> Expr:
        token = self.peek()
        if token is None:
            raise ConditionParseError("expected a clause", col=len(self.text) + 1)
        if token[0] == "lparen":
            self.take()
            inner = self.parse_or()
            self.expect("rparen")
            return inner
        if token[0] == "name" and token[1] == "slot":
            self.take()
            self.expect("lparen")
            name = self.expect("name")
            self.expect("rparen")
            op = self.expect("op")
            literal_token = self.take()
            if literal_token[0] == "string":
                literal: Union[str, float] = literal_token[1][1:-1]
            elif literal_token[0] == "number":
                literal = float(literal_token[1])
            else:
                raise ConditionParseError(
                    f"expected a literal, got {literal_token[1]!r}", col=literal_token[2]
                )
            return Comparison(slot=name[1], op=op[1], literal=literal)
        raise ConditionParseError(f"expected 'slot(' or '(', got {token[1]!r}", col=token[2])


def parse_condition(text: str) -> Expr:
    if not text or not text.strip():
        raise ConditionParseError("empty condition", col=1)
    return _Parser(text).parse()


def canonical_condition(expr: Expr) -> str:
    if isinstance(expr, Comparison):
        if isinstance(expr.literal, str):
            literal = f"'{expr.literal}'"
        else:
            literal = repr(expr.literal)
        return f"slot({expr.slot}) {expr.op} {literal}"
    if isinstance(expr, And):
        parts = [
            f"({canonical_condition(i)})" if isinstance(i, Or) else canonical_condition(i)
            for i in expr.items
        ]
        return " and ".join(parts)
    parts = [canonical_condition(i) for i in expr.items]
    return " or ".join(parts)


def evaluate_condition(expr: Expr, slots: Mapping) -> bool:
    if isinstance(expr, And):
        return all(evaluate_condition(i, slots) for i in expr.items)
    if isinstance(expr, Or):
        return any(evaluate_condition(i, slots) for i in expr.items)
    if expr.slot not in slots:
        return False
    value = slots[expr.slot]
    literal = expr.literal
    numeric = isinstance(value, (int, float)) and not isinstance(value, bool)
    if expr.op in ("==", "!="):
        if isinstance(literal, float):
            equal = numeric and float(value) == literal
        else:
            equal = isinstance(value, str) and value == literal
        return equal if expr.op == "==" else not equal
    if not numeric or not isinstance(literal, float):
        return False
    value = float(value)
    if expr.op == "<":
        return value < literal
    if expr.op == "<=":
        return value <= literal
    if expr.op == ">":
        return value > literal
    return value >= literal


def condition_slots(expr: Expr) -> list[str]:
    """Slot names referenced by the expression, in first-appearance order."""
    if isinstance(expr, Comparison):
        return [expr.slot]
    out: list[str] = []
    for item in expr.items:
        for slot in condition_slots(item):
            if slot not in out:
                out.append(slot)
    return out


def decompose_clauses(expr: Expr) -> list[Expr]:
    """Top-level conjunction as an ordered clause list; a disjunction stays
    one composite clause."""
    return list(expr.items) if isinstance(expr, And) else [expr]


def clause_guard_text(clause: Expr) -> str:
    text = canonical_condition(clause)
    return f"({text})" if isinstance(clause, Or) else text


# -- rules -------------------------------------------------------------------


class ActionKind(str, Enum):
    REQUIRE_STEP = "RequireStep"
    FORBID_OUTPUT_CONTAINING = "ForbidOutputContaining"
    ROUTE_TO = "RouteTo"


class Hardness(str, Enum):
    HARD = "Hard"
    SOFT = "Soft"


@dataclass(frozen=True)
class RuleAction:
    kind: ActionKind
    label: str | None = None
    tokens: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.kind is ActionKind.FORBID_OUTPUT_CONTAINING:
            out["tokens"] = list(self.tokens)
        else:
            out["label"] = self.label
        return out


_RULE_FIELDS = {"rule_id", "condition", "action", "hardness", "description"}
_ACTION_FIELDS = {"kind", "label", "tokens"}


@dataclass(frozen=True)
class AtomicRule:
    rule_id: str
    condition: str
    action: RuleAction
    hardness: Hardness = Hardness.HARD
    description: str = ""

    def check(self) -> Expr:
        if not self.rule_id or not self.rule_id.strip():
            raise InvalidRule("rule_id must be non-empty")
        expr = parse_condition(self.condition)
        if self.action.kind is ActionKind.FORBID_OUTPUT_CONTAINING:
            if not self.action.tokens:
                raise InvalidRule(f"rule {self.rule_id!r}: forbid rule needs at least one token")
            if any(not t.strip() for t in self.action.tokens):
                raise InvalidRule(f"rule {self.rule_id!r}: blank forbidden token")
        else:
            if not self.action.label or not self.action.label.strip():
                raise InvalidRule(f"rule {self.rule_id!r}: action needs a target label")
        return expr

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "condition": self.condition,
            "action": self.action.to_dict(),
            "hardness": self.hardness.value,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "AtomicRule":
        unknown = set(raw) - _RULE_FIELDS
        if unknown:
            raise InvalidRule(f"unknown rule fields: {sorted(unknown)}")
        action_raw = raw.get("action")
        if not isinstance(action_raw, Mapping):
            raise InvalidRule("rule action must be an object")
        extra = set(action_raw) - _ACTION_FIELDS
        if extra:
            raise InvalidRule(f"unknown action fields: {sorted(extra)}")
        try:
            kind = ActionKind(action_raw.get("kind"))
        except ValueError:
            raise InvalidRule(f"unknown action kind {action_raw.get('kind')!r}") from None
        action = RuleAction(
            kind=kind,
            label=action_raw.get("label"),
            tokens=tuple(action_raw.get("tokens", ())),
        )
        try:
            hardness = Hardness(raw.get("hardness", "Hard"))
        except ValueError:
            raise InvalidRule(f"unknown hardness {raw.get('hardness')!r}") from None
        rule = cls(
            rule_id=raw.get("rule_id", ""),
            condition=raw.get("condition", ""),
            action=action,
            hardness=hardness,
            description=raw.get("description", ""),
        )
        rule.check()
        return rule


@dataclass
class RuleSet:
    rules: list[AtomicRule] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for rule in self.rules:
            if rule.rule_id in seen:
                raise DuplicateRuleId(rule.rule_id)
            seen.add(rule.rule_id)

    def to_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.rules]

    @classmethod
    def from_dicts(cls, raw: list) -> "RuleSet":
        if not isinstance(raw, list):
            raise InvalidRule("ruleset document must be a JSON array of rules")
        return cls(rules=[AtomicRule.from_dict(r) for r in raw])


def add_rule(ruleset: RuleSet, rule: AtomicRule) -> RuleSet:
    """Return a new ruleset with the rule appended; the input is untouched."""
    if any(r.rule_id == rule.rule_id for r in ruleset.rules):
        raise DuplicateRuleId(rule.rule_id)
    rule.check()
    return RuleSet(rules=[*ruleset.rules, rule])


# -- grafting ----------------------------------------------------------------


def graft(ruleset: RuleSet) -> CanvasGraph:
    """Build a traversable graph from routing rules.

    One root Decision per distinct leading slot; rules sharing a canonical
    clause prefix share the path; each clause becomes an edge guard with
    confidence 1.0. Forbid rules stay in the ruleset (they gate text, not
    traversal). Construction order follows the ruleset, so equal rulesets
    produce byte-identical graphs.
    """
    if not ruleset.rules:
        raise EmptyRuleSet("cannot graft an empty ruleset")
    graftable: list[tuple[AtomicRule, list[Expr]]] = []
    routing: dict[tuple[str, ...], tuple[str, str]] = {}
    for rule in ruleset.rules:
        expr = rule.check()
        if rule.action.kind is ActionKind.FORBID_OUTPUT_CONTAINING:
            continue
        clauses = decompose_clauses(expr)
        key = tuple(clause_guard_text(c) for c in clauses)
        if rule.action.kind is ActionKind.ROUTE_TO and rule.hardness is Hardness.HARD:
            previous = routing.get(key)
            if previous is not None and previous[1] != rule.action.label:
                raise ConflictingRules([previous[0], rule.rule_id])
            routing.setdefault(key, (rule.rule_id, rule.action.label or ""))
        graftable.append((rule, clauses))
    if not graftable:
        raise EmptyRuleSet("ruleset contains no routing or step rules to graft")

    graph = CanvasGraph()
    prefix_nodes: dict[tuple[str, ...], str] = {}
    root_by_slot: dict[str, str] = {}
    target_nodes: dict[tuple[str, str], str] = {}
    made_edges: set[tuple[str, str, str]] = set()

    def new_node(kind: NodeKind, label: str, slot_key: str | None = None) -> str:
        node = ChainNode(
            id=f"n{len(graph.nodes):04d}",
            kind=kind,
            label=label,
            slot_key=slot_key,
            provenance={"expert"},
        )
        node.check()
        graph.nodes[node.id] = node
        graph._out.setdefault(node.id, set())
        graph._in.setdefault(node.id, set())
        return node.id

    def new_edge(from_id: str, to_id: str, guard: str) -> None:
        if (from_id, guard, to_id) in made_edges:
            return
        made_edges.add((from_id, guard, to_id))
        edge = ChainEdge(
            id=f"e{len(graph.edges):04d}",
            from_id=from_id,
            to_id=to_id,
            confidence=1.0,
            guard=guard,
            status=EdgeStatus.ACTIVE,
            support=SupportSet(),
        )
        graph._insert_edge_unchecked(edge)

    for rule, clauses in graftable:
        guards = [clause_guard_text(c) for c in clauses]
        lead = condition_slots(clauses[0])[0]
        if lead not in root_by_slot:
            root_by_slot[lead] = new_node(NodeKind.DECISION, f"branch on {lead}", slot_key=lead)
        at_node = root_by_slot[lead]
        for i, clause in enumerate(clauses):
            last = i == len(clauses) - 1
            if last:
                if rule.action.kind is ActionKind.ROUTE_TO:
                    target_key = ("Terminal", rule.action.label or "")
                    target_kind = NodeKind.TERMINAL
                else:
                    target_key = ("Action", rule.action.label or "")
                    target_kind = NodeKind.ACTION
                if target_key not in target_nodes:
                    target_nodes[target_key] = new_node(target_kind, rule.action.label or "")
                to_node = target_nodes[target_key]
            else:
                prefix = tuple(guards[: i + 1])
                if prefix not in prefix_nodes:
                    next_slot = condition_slots(clauses[i + 1])[0]
                    prefix_nodes[prefix] = new_node(
                        NodeKind.DECISION, f"branch on {next_slot}", slot_key=next_slot
                    )
                to_node = prefix_nodes[prefix]
            new_edge(at_node, to_node, guards[i])
            at_node = to_node

    graph.roots = set(root_by_slot.values())
    graph.version = 1
    graph.promoted = True
    digest = checksum_of(ruleset.to_dicts())
    graph.graph_id = f"g{digest[:12]}"
    validation = graph.validate()
    assert validation.is_empty, f"graft produced an invalid graph: {validation.describe()}"
    return graph


# -- verification channel ------------------------------------------------------


class VerdictKind(str, Enum):
    PASS = "Pass"
    PASS_WITH_WARNINGS = "PassWithWarnings"
    BLOCKED = "Blocked"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    rule_ids: tuple[str, ...] = ()

    @property
    def blocked(self) -> bool:
        return self.kind is VerdictKind.BLOCKED

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "rule_ids": list(self.rule_ids)}


_WORD_RE = re.compile(r"[a-z0-9_]+")


def _words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def contains_token(text_words: list[str], token: str) -> bool:
    """Whole-token match; multi-word tokens must appear as a contiguous run."""
    needle = _words(token)
    if not needle:
        return False
    span = len(needle)
    return any(text_words[i : i + span] == needle for i in range(len(text_words) - span + 1))


def verify_output(candidate_text: str, state, ruleset: RuleSet) -> Verdict:
    """Gate candidate text against every forbid rule whose condition the
    current slots satisfy. Hard violations block; soft ones only warn."""
    slots = getattr(state, "working_memory", state) or {}
    text_words = _words(candidate_text)
    hard: list[str] = []
    soft: list[str] = []
    for rule in ruleset.rules:
        if rule.action.kind is not ActionKind.FORBID_OUTPUT_CONTAINING:
            continue
        if not evaluate_condition(parse_condition(rule.condition), slots):
            continue
        if any(contains_token(text_words, token) for token in rule.action.tokens):
            (hard if rule.hardness is Hardness.HARD else soft).append(rule.rule_id)
    if hard:
        return Verdict(kind=VerdictKind.BLOCKED, rule_ids=tuple(hard))
    if soft:
        return Verdict(kind=VerdictKind.PASS_WITH_WARNINGS, rule_ids=tuple(soft))
    return Verdict(kind=VerdictKind.PASS)
