"""Utterance grammar, session walking, and feedback application."""

import pytest
from conftest import make_graph

from crystal.agents import AgentProfile
from crystal.dialogue import (
    MoveKind,
    SessionManager,
    SessionStatus,
    apply_feedback,
    open_session,
    parse_utterance,
    propose_clarification,
    take_turn,
)
from crystal.engine import Engine
from crystal.errors import (
    GraphNotPromoted,
    NoRoots,
    NotFound,
    NothingToAsk,
    SessionClosed,
    UtteranceParseError,
)
from crystal.evolution import Outcome
from crystal.graph import EdgeStatus, EngineConfig
from crystal.rules import ActionKind, AtomicRule, Hardness, RuleAction, RuleSet, graft

CFG = EngineConfig()
NO_RULES = RuleSet()


def triage_ruleset(extra=()):
    rules = [
        AtomicRule(
            rule_id="r-dizzy-mild",
            condition="slot(symptom) == 'dizziness' and slot(severity) == 'mild'",
            action=RuleAction(kind=ActionKind.ROUTE_TO, label="rest and fluids"),
        ),
        AtomicRule(
            rule_id="r-dizzy-severe",
            condition="slot(symptom) == 'dizziness' and slot(severity) == 'severe'",
            action=RuleAction(kind=ActionKind.ROUTE_TO, label="emergency referral"),
        ),
        AtomicRule(
            rule_id="r-fever",
            condition="slot(symptom) == 'fever'",
            action=RuleAction(kind=ActionKind.ROUTE_TO, label="schedule a clinic visit"),
        ),
        *extra,
    ]
    return RuleSet(rules=rules)


def triage_session(extra_rules=(), session_id="s1"):
    ruleset = triage_ruleset(extra_rules)
    return open_session(graft(ruleset), CFG, ruleset, session_id)


# ---------------------------------------------------------------- utterances


def test_parse_pairs_and_semicolons():
    assert parse_utterance("symptom=dizziness; severity=mild") == {
        "symptom": "dizziness",
        "severity": "mild",
    }


def test_parse_coerces_numbers_and_strips_quotes():
    got = parse_utterance("age=42; name='Jo Ann'; note=\"ok\"")
    assert got == {"age": 42.0, "name": "Jo Ann", "note": "ok"}
    assert isinstance(got["age"], float)


def test_parse_bare_value_needs_pending_question():
    assert parse_utterance("mild", pending_slot="severity") == {"severity": "mild"}
    with pytest.raises(UtteranceParseError, match="bare value"):
        parse_utterance("mild")


def test_parse_one_bare_value_at_most():
    with pytest.raises(UtteranceParseError, match="second bare"):
        parse_utterance("mild; severe", pending_slot="severity")


def test_parse_bare_and_pairs_can_mix():
    got = parse_utterance("mild; duration=3", pending_slot="severity")
    assert got == {"severity": "mild", "duration": 3.0}


@pytest.mark.parametrize("bad", ["", "   ", ";;", "=x", "x=", " = "])
def test_parse_rejects_empty_and_malformed(bad):
    with pytest.raises(UtteranceParseError):
        parse_utterance(bad, pending_slot="s")


# ---------------------------------------------------------------- sessions


def test_open_session_requires_promoted_graph():
    graph = make_graph(["a"], [], promoted=False)
    with pytest.raises(GraphNotPromoted):
        open_session(graph, CFG, NO_RULES, "s1")


def test_open_session_requires_roots():
    graph = make_graph([], [], promoted=True)
    with pytest.raises(NoRoots):
        open_session(graph, CFG, NO_RULES, "s1")


def test_open_session_starts_at_smallest_root():
    graph = make_graph(["m", "b", "z"], [], roots={"m", "b", "z"}, promoted=True)
    session = open_session(graph, CFG, NO_RULES, "s1")
    assert session.current_node_id == "b"


def test_session_pins_a_snapshot():
    graph = graft(triage_ruleset())
    session = open_session(graph, CFG, NO_RULES, "s1")
    edge_id = next(iter(graph.edges))
    graph.edges[edge_id].confidence = 0.01
    assert session.graph.edges[edge_id].confidence == 1.0


# ---------------------------------------------------------------- turns


def test_ask_then_answer():
    session = triage_session()
    move = take_turn(session, "symptom=dizziness")
    assert move.kind is MoveKind.ASK
    assert move.asked_slot == "severity"
    assert move.text == "What is severity?"
    assert len(move.hops) == 1
    assert session.status is SessionStatus.OPEN
    assert session.pending_question == "severity"

    move = take_turn(session, "mild")
    assert move.kind is MoveKind.ANSWER
    assert move.text == "rest and fluids"
    assert session.status is SessionStatus.CLOSED
    assert len(session.visited_edge_ids) == 2


def test_full_information_answers_in_one_turn():
    session = triage_session()
    move = take_turn(session, "symptom=dizziness; severity=severe")
    assert move.kind is MoveKind.ANSWER
    assert move.text == "emergency referral"
    assert len(move.hops) == 2


def test_closed_session_rejects_turns():
    session = triage_session()
    take_turn(session, "symptom=fever")
    with pytest.raises(SessionClosed):
        take_turn(session, "symptom=fever")


def test_transcript_records_both_sides():
    session = triage_session()
    take_turn(session, "symptom=dizziness")
    assert [t["role"] for t in session.transcript] == ["user", "engine"]
    assert session.transcript[1]["kind"] == "Ask"


def test_unusable_slots_still_ask():
    session = triage_session()
    move = take_turn(session, "mood=sunny")
    assert move.kind is MoveKind.ASK
    assert move.asked_slot == "symptom"
    assert move.hops == []


def test_question_uses_node_label_when_interrogative():
    graph = make_graph(
        [("d", "Decision", "How severe is it?"), ("t", "Terminal", "rest")],
        [("e0", "d", "t", {"guard": "slot(severity) == 'mild'"})],
        promoted=True,
    )
    graph.nodes["d"].slot_key = "severity"
    session = open_session(graph, CFG, NO_RULES, "s1")
    move = take_turn(session, "topic=fall")
    assert move.kind is MoveKind.ASK
    assert move.text == "How severe is it?"


def test_clarification_prefers_slot_unlocking_most_edges():
    graph = make_graph(
        [("d", "Decision"), ("t1", "Terminal"), ("t2", "Terminal"), ("t3", "Terminal")],
        [
            ("e0", "d", "t1", {"guard": "slot(severity) == 'mild'"}),
            ("e1", "d", "t2", {"guard": "slot(severity) == 'severe'"}),
            ("e2", "d", "t3", {"guard": "slot(duration) == 'long'"}),
        ],
        promoted=True,
    )
    session = open_session(graph, CFG, NO_RULES, "s1")
    slot, _ = propose_clarification(session, session.graph.node("d"))
    assert slot == "severity"


def test_clarification_tie_breaks_alphabetically():
    graph = make_graph(
        [("d", "Decision"), ("t1", "Terminal"), ("t2", "Terminal")],
        [
            ("e0", "d", "t1", {"guard": "slot(zeta) == 1"}),
            ("e1", "d", "t2", {"guard": "slot(alpha) == 1"}),
        ],
        promoted=True,
    )
    session = open_session(graph, CFG, NO_RULES, "s1")
    slot, question = propose_clarification(session, session.graph.node("d"))
    assert slot == "alpha"
    assert question == "What is alpha?"


def test_clarification_raises_when_everything_is_known():
    graph = make_graph(
        [("d", "Decision"), ("t1", "Terminal")],
        [("e0", "d", "t1", {"guard": "slot(severity) == 'mild'"})],
        promoted=True,
    )
    session = open_session(graph, CFG, NO_RULES, "s1")
    session.working_memory["severity"] = "severe"  # known but unsatisfying
    with pytest.raises(NothingToAsk):
        propose_clarification(session, session.graph.node("d"))


def test_edge_selection_order_weight_confidence_id():
    graph = make_graph(
        ["a", ("t1", "Terminal", "left"), ("t2", "Terminal", "right")],
        [
            ("e1", "a", "t1", {"weight": 1.0, "confidence": 0.2}),
            ("e0", "a", "t2", {"weight": 1.0, "confidence": 0.2}),
        ],
        promoted=True,
    )
    session = open_session(graph, CFG, NO_RULES, "s1")
    move = take_turn(session, "x=1")
    assert move.hops == ["e0"]  # same weight and confidence: smallest id
    assert move.text == "right"


def test_retired_edges_are_not_walked():
    graph = make_graph(
        ["a", ("t1", "Terminal", "old"), ("t2", "Terminal", "new")],
        [
            ("e0", "a", "t1", {"weight": 9.0, "status": EdgeStatus.RETIRED}),
            ("e1", "a", "t2"),
        ],
        promoted=True,
    )
    session = open_session(graph, CFG, NO_RULES, "s1")
    move = take_turn(session, "x=1")
    assert move.text == "new"


# ---------------------------------------------------------------- verification gate


def insurance_forbid(hardness=Hardness.HARD):
    return AtomicRule(
        rule_id="r-block-referral",
        condition="slot(insurance) == 'none'",
        action=RuleAction(
            kind=ActionKind.FORBID_OUTPUT_CONTAINING, tokens=("emergency referral",)
        ),
        hardness=hardness,
    )


def test_blocked_terminal_refuses_without_leaking():
    session = triage_session(extra_rules=[insurance_forbid()])
    move = take_turn(session, "symptom=dizziness; severity=severe; insurance=none")
    assert move.kind is MoveKind.REFUSE
    assert "emergency referral" not in move.text
    assert move.blocked_by == ["r-block-referral"]
    assert session.status is SessionStatus.OPEN


def test_refusal_can_be_lifted_by_new_facts():
    session = triage_session(extra_rules=[insurance_forbid()])
    take_turn(session, "symptom=dizziness; severity=severe; insurance=none")
    move = take_turn(session, "insurance=full")
    assert move.kind is MoveKind.ANSWER
    assert move.text == "emergency referral"
    assert session.status is SessionStatus.CLOSED


def test_soft_forbid_passes_with_warning():
    session = triage_session(extra_rules=[insurance_forbid(hardness=Hardness.SOFT)])
    move = take_turn(session, "symptom=dizziness; severity=severe; insurance=none")
    assert move.kind is MoveKind.ANSWER
    assert move.warnings == ["r-block-referral"]
    assert session.status is SessionStatus.CLOSED


# ---------------------------------------------------------------- escalation


def dead_end_graph():
    return make_graph(
        ["a", ("b", "Action", "needs input")],
        [("e0", "a", "b")],
        promoted=True,
    )


def test_dead_end_escalates_without_engine():
    session = open_session(dead_end_graph(), CFG, NO_RULES, "s1")
    move = take_turn(session, "x=1")
    assert move.kind is MoveKind.ESCALATE
    assert move.review_item_id is None
    assert session.status is SessionStatus.AWAITING_REVIEW


def test_dead_end_escalation_stages_exploration():
    engine = Engine.create(dead_end_graph(), CFG)
    engine.explorer = AgentProfile("explorer")
    session = open_session(engine.graph, CFG, NO_RULES, "s1")
    move = take_turn(session, "x=1", engine=engine)
    assert move.kind is MoveKind.ESCALATE
    assert move.review_item_id is not None
    (item,) = engine.pending_reviews()
    assert item.item_id == move.review_item_id
    assert all(
        engine.graph.edges[e].status is EdgeStatus.PROVISIONAL
        for e in item.evidence["edge_ids"]
    )


def test_escalation_survives_agent_failure():
    def boom(prompt):
        raise RuntimeError("offline")

    engine = Engine.create(dead_end_graph(), CFG)
    engine.explorer = AgentProfile("explorer", responder=boom)
    session = open_session(engine.graph, CFG, NO_RULES, "s1")
    move = take_turn(session, "x=1", engine=engine)
    assert move.kind is MoveKind.ESCALATE
    assert move.review_item_id is None
    assert session.status is SessionStatus.AWAITING_REVIEW


# ---------------------------------------------------------------- feedback


def feedback_fixture():
    graph = make_graph(
        ["a", "b", ("c", "Terminal", "all done")],
        [
            ("e0", "a", "b", {"confidence": 0.5, "weight": 1.0}),
            ("e1", "b", "c", {"confidence": 0.5, "weight": 1.0}),
        ],
        promoted=True,
    )
    engine = Engine.create(graph, EngineConfig(alpha=0.1))
    session = open_session(engine.graph, engine.config, NO_RULES, "s1")
    move = take_turn(session, "x=1")
    assert move.kind is MoveKind.ANSWER
    return engine, session


def test_success_feedback_reinforces_visited_edges():
    engine, session = feedback_fixture()
    report = apply_feedback(session, engine, Outcome.SUCCESS)
    assert report.delta_p == 1.0 and report.delta_w == 1.0
    assert [a["edge_id"] for a in report.applied] == ["e0", "e1"]
    assert engine.graph.edges["e0"].confidence == 0.6
    assert engine.graph.edges["e0"].weight == 2.0


def test_failure_feedback_touches_confidence_only():
    engine, session = feedback_fixture()
    apply_feedback(session, engine, Outcome.FAILURE)
    assert engine.graph.edges["e0"].confidence == 0.4
    assert engine.graph.edges["e0"].weight == 1.0


def test_expert_failure_doubles_the_penalty():
    engine, session = feedback_fixture()
    apply_feedback(session, engine, Outcome.FAILURE, expert_flag=True)
    assert engine.graph.edges["e0"].confidence == 0.3
    actor = engine.records[-1].op["actor"]
    assert actor["kind"] == "Expert"


def test_user_feedback_actor_is_user():
    engine, session = feedback_fixture()
    apply_feedback(session, engine, Outcome.SUCCESS)
    assert engine.records[-1].op["actor"] == {"kind": "User", "id": "s1"}


def test_neutral_feedback_writes_nothing():
    engine, session = feedback_fixture()
    before = len(engine.records)
    report = apply_feedback(session, engine, Outcome.NEUTRAL)
    assert report.applied == []
    assert len(engine.records) == before


def test_feedback_deduplicates_revisited_edges():
    engine, session = feedback_fixture()
    session.visited_edge_ids.append("e0")
    report = apply_feedback(session, engine, Outcome.SUCCESS)
    assert [a["edge_id"] for a in report.applied] == ["e0", "e1"]
    assert engine.graph.edges["e0"].weight == 2.0  # reinforced once


def test_feedback_skips_edges_gone_from_live_graph():
    engine, session = feedback_fixture()
    session.visited_edge_ids.append("ghost")
    report = apply_feedback(session, engine, Outcome.SUCCESS)
    assert report.skipped == ["ghost"]


# ---------------------------------------------------------------- manager


def test_session_manager_ids_and_lookup():
    manager = SessionManager()
    graph = graft(triage_ruleset())
    s0 = manager.open(graph, CFG, NO_RULES)
    s1 = manager.open(graph, CFG, NO_RULES)
    assert [s0.session_id, s1.session_id] == ["s0000", "s0001"]
    assert manager.get("s0001") is s1
    assert manager.all_sessions() == [s0, s1]
    with pytest.raises(NotFound):
        manager.get("s9999")
