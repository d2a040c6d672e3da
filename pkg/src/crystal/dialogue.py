"""Multi-turn dialogue over a promoted graph.

A session pins a snapshot of the graph at open time and walks it: each user
utterance fills slots, the walker advances greedily along the best satisfied
edge until it must ask, answer, refuse, or escalate. Feedback after the fact
is applied to the live graph through the engine, not to the pinned copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .engine import Engine
from .errors import (
    GraphNotPromoted,
    NoRoots,
    NotFound,
    NothingToAsk,
    SessionClosed,
    UtteranceParseError,
)
from .evolution import Actor, Feedback, Outcome, feedback_to_delta
from .graph import TRAVERSABLE, CanvasGraph, ChainNode, EngineConfig, NodeKind
from .rules import (
    RuleSet,
    VerdictKind,
    condition_slots,
    evaluate_condition,
    parse_condition,
    verify_output,
)


class SessionStatus(str, Enum):
    OPEN = "Open"
    AWAITING_REVIEW = "AwaitingReview"
    CLOSED = "Closed"


class MoveKind(str, Enum):
    ASK = "Ask"
    ANSWER = "Answer"
    REFUSE = "Refuse"
    ESCALATE = "Escalate"


@dataclass
class Move:
    kind: MoveKind
    text: str
    asked_slot: str | None = None
    hops: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    blocked_by: list[str] = field(default_factory=list)
    review_item_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "text": self.text,
            "asked_slot": self.asked_slot,
            "hops": list(self.hops),
            "warnings": list(self.warnings),
            "blocked_by": list(self.blocked_by),
            "review_item_id": self.review_item_id,
        }


def _coerce_value(raw: str) -> object:
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in ("'", '"'):
        return raw[1:-1]
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_utterance(text: str, pending_slot: str | None = None) -> dict[str, object]:
    """Split an utterance into slot assignments. Accepts semicolon-separated
    name=value pairs, plus one bare value if a question is pending."""
    if not text or not text.strip():
        raise UtteranceParseError("empty utterance")
    updates: dict[str, object] = {}
    bare_used = False
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" in part:
            name, _, value = part.partition("=")
            name = name.strip()
            value = value.strip()
            if not name or not value:
                raise UtteranceParseError(f"bad assignment {part!r}")
            updates[name] = _coerce_value(value)
        else:
            if pending_slot is None:
                raise UtteranceParseError(f"bare value {part!r} with no pending question")
            if bare_used:
                raise UtteranceParseError(f"second bare value {part!r}")
            updates[pending_slot] = _coerce_value(part)
            bare_used = True
    if not updates:
        raise UtteranceParseError("utterance carries no assignments")
    return updates


@dataclass
class Session:
    session_id: str
    graph: CanvasGraph  # pinned snapshot
    graph_id: str
    config: EngineConfig
    ruleset: RuleSet
    current_node_id: str
    status: SessionStatus = SessionStatus.OPEN
    working_memory: dict = field(default_factory=dict)
    visited_edge_ids: list[str] = field(default_factory=list)
    pending_question: str | None = None
    transcript: list[dict] = field(default_factory=list)
    turn_count: int = 0

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "graph_id": self.graph_id,
            "status": self.status.value,
            "current_node": self.current_node_id,
            "working_memory": dict(self.working_memory),
            "visited_edge_ids": list(self.visited_edge_ids),
            "pending_question": self.pending_question,
            "transcript": list(self.transcript),
            "turn_count": self.turn_count,
        }


def open_session(
    graph: CanvasGraph,
    config: EngineConfig,
    ruleset: RuleSet,
    session_id: str,
) -> Session:
    if not graph.promoted:
        raise GraphNotPromoted(graph.graph_id)
    if not graph.roots:
        raise NoRoots(graph.graph_id)
    snapshot = graph.clone()
    return Session(
        session_id=session_id,
        graph=snapshot,
        graph_id=graph.graph_id,
        config=config,
        ruleset=ruleset,
        current_node_id=min(snapshot.roots),
    )


def _satisfied(guard: str | None, slots: dict) -> bool:
    if guard is None:
        return True
    return evaluate_condition(parse_condition(guard), slots)


def _select_edge(session: Session, node_id: str):
    """Best satisfied traversable edge: heaviest, then most confident, then
    smallest id. None when nothing qualifies."""
    candidates = [
        e
        for e in session.graph.out_edges(node_id, TRAVERSABLE)
        if _satisfied(e.guard, session.working_memory)
    ]
    if not candidates:
        return None
    return sorted(candidates, key=lambda e: (-e.weight, -e.confidence, e.id))[0]


def propose_clarification(session: Session, node: ChainNode) -> tuple[str, str]:
    """Pick the unknown slot that unblocks the most outgoing edges (ties go
    alphabetically) and phrase the question for it."""
    counts: dict[str, int] = {}
    for edge in session.graph.out_edges(node.id, TRAVERSABLE):
        if edge.guard is None:
            continue
        for slot in condition_slots(parse_condition(edge.guard)):
            if slot not in session.working_memory:
                counts[slot] = counts.get(slot, 0) + 1
    if not counts:
        raise NothingToAsk(f"no unknown slots at node {node.id!r}")
    best = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
    if node.label.rstrip().endswith("?"):
        question = node.label
    else:
        question = f"What is {best}?"
    return best, question


def take_turn(session: Session, utterance: str, engine: Engine | None = None) -> Move:
    """Consume one user utterance and advance as far as the graph allows.

    Terminal reached: the answer passes through the rule gate first. Decision
    short on facts: ask for the most useful slot. Dead end: escalate, and when
    the live engine is supplied, stage an exploration for review.
    """
    if session.status is not SessionStatus.OPEN:
        raise SessionClosed(f"session {session.session_id} is {session.status.value}")
    updates = parse_utterance(utterance, session.pending_question)
    session.working_memory.update(updates)
    session.pending_question = None
    session.turn_count += 1
    session.transcript.append({"role": "user", "text": utterance})

    hops: list[str] = []
    while True:
        node = session.graph.node(session.current_node_id)
        if node.kind is NodeKind.TERMINAL:
            move = _answer_move(session, node, hops)
            break
        edge = _select_edge(session, node.id)
        if edge is not None:
            hops.append(edge.id)
            session.visited_edge_ids.append(edge.id)
            session.current_node_id = edge.to_id
            continue
        try:
            slot, question = propose_clarification(session, node)
        except NothingToAsk:
            move = _escalate_move(session, node, hops, engine)
            break
        session.pending_question = slot
        move = Move(kind=MoveKind.ASK, text=question, asked_slot=slot, hops=hops)
        break

    session.transcript.append({"role": "engine", "text": move.text, "kind": move.kind.value})
    return move


def _answer_move(session: Session, node: ChainNode, hops: list[str]) -> Move:
    verdict = verify_output(node.label, session, session.ruleset)
    if verdict.kind is VerdictKind.BLOCKED:
        # refusal text must not carry the blocked answer itself
        return Move(
            kind=MoveKind.REFUSE,
            text="The prepared answer was withheld by a safety rule.",
            hops=hops,
            blocked_by=list(verdict.rule_ids),
        )
    session.status = SessionStatus.CLOSED
    warnings = list(verdict.rule_ids) if verdict.kind is VerdictKind.PASS_WITH_WARNINGS else []
    return Move(kind=MoveKind.ANSWER, text=node.label, hops=hops, warnings=warnings)


def _escalate_move(
    session: Session, node: ChainNode, hops: list[str], engine: Engine | None
) -> Move:
    session.status = SessionStatus.AWAITING_REVIEW
    item_id = None
    if engine is not None and engine.explorer is not None:
        try:
            item = engine.explore(node.id, engine.explorer, session.working_memory)
            item_id = item.item_id
        except Exception:
            item_id = None  # escalation stands even if exploration cannot
    return Move(
        kind=MoveKind.ESCALATE,
        text="No applicable continuation from here; queued for expert review.",
        hops=hops,
        review_item_id=item_id,
    )


@dataclass
class FeedbackReport:
    delta_p: float
    delta_w: float
    applied: list[dict] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "delta_p": self.delta_p,
            "delta_w": self.delta_w,
            "applied": list(self.applied),
            "skipped": list(self.skipped),
        }


def apply_feedback(
    session: Session, engine: Engine, outcome: Outcome, expert_flag: bool = False
) -> FeedbackReport:
    """Map an outcome to per-edge deltas and push them through the engine
    against the live graph, edge by visited edge."""
    feedback = Feedback(
        session_id=session.session_id,
        visited_edge_ids=tuple(session.visited_edge_ids),
        outcome=outcome,
        expert_flag=expert_flag,
    )
    deltas = feedback_to_delta(feedback)
    delta_p, delta_w = next(iter(deltas.values()), (0.0, 0.0))
    report = FeedbackReport(delta_p=delta_p, delta_w=delta_w)
    if delta_p == 0 and delta_w == 0:
        return report
    actor = Actor(kind="Expert" if expert_flag else "User", actor_id=session.session_id)
    seen: set[str] = set()
    for edge_id in session.visited_edge_ids:
        if edge_id in seen:
            continue
        seen.add(edge_id)
        if edge_id not in engine.graph.edges:
            report.skipped.append(edge_id)
            continue
        dp, dw = deltas[edge_id]
        new_p = engine.update_confidence(edge_id, dp, actor)
        new_w = engine.accumulate_weight(edge_id, dw, actor)
        report.applied.append({"edge_id": edge_id, "confidence": new_p, "weight": new_w})
    return report


class SessionManager:
    """In-memory registry of sessions, ids handed out in open order."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}

    def open(self, graph: CanvasGraph, config: EngineConfig, ruleset: RuleSet) -> Session:
        session_id = f"s{len(self._sessions):04d}"
        session = open_session(graph, config, ruleset, session_id)
        self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise NotFound(session_id)
        return session

    def all_sessions(self) -> list[Session]:
        return list(self._sessions.values())
