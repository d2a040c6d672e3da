"""Scripted-user simulation: answer accuracy as a function of turn budget.

A scenario file defines the graph source (rules to graft or chains to merge),
the cases (target slot values plus the expected answer), and the order in
which the scripted user volunteers facts. Each case runs once per budget:
the user opens with the first fact, then answers whatever the engine asks,
volunteering the next unrevealed fact when nothing is pending. A case counts
as correct when the session closes with exactly the expected answer text
within the budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dialogue import MoveKind, SessionStatus, open_session, take_turn
from .errors import InvalidPayload
from .extraction import CandidateChain
from .graph import CanvasGraph, EngineConfig
from .merge import merge
from .rules import RuleSet, graft


@dataclass(frozen=True)
class ScenarioCase:
    slots: dict
    expected: str


@dataclass
class Scenario:
    graph: CanvasGraph
    config: EngineConfig
    ruleset: RuleSet
    cases: list[ScenarioCase]
    reveal_order: list[str]


def load_scenario(raw: dict) -> Scenario:
    config = EngineConfig.from_dict(raw["config"]) if raw.get("config") else EngineConfig()
    if raw.get("rules"):
        ruleset = RuleSet.from_dicts(raw["rules"])
        graph = graft(ruleset)
    elif raw.get("chains"):
        chains = [CandidateChain.from_dict(c) for c in raw["chains"]]
        graph, _ = merge(chains, config)
        graph.promoted = True  # offline simulation skips the review gate
        ruleset = RuleSet(rules=())
    else:
        raise InvalidPayload("scenario needs either rules or chains")
    if not raw.get("cases"):
        raise InvalidPayload("scenario has no cases")
    cases = [ScenarioCase(slots=dict(c["slots"]), expected=c["expected"]) for c in raw["cases"]]
    reveal_order = list(raw.get("reveal_order") or [])
    if not reveal_order:
        reveal_order = sorted({name for case in cases for name in case.slots})
    return Scenario(
        graph=graph, config=config, ruleset=ruleset, cases=cases, reveal_order=reveal_order
    )


def load_scenario_text(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise InvalidPayload(f"scenario is not valid JSON: {err}") from None
    return load_scenario(raw)


def _format_value(value: object) -> str:
    return str(value)


def run_case(scenario: Scenario, case: ScenarioCase, budget: int, session_id: str) -> tuple[bool, bool]:
    """Play one case under a turn budget. Returns (answered, correct)."""
    session = open_session(scenario.graph, scenario.config, scenario.ruleset, session_id)
    revealed: set[str] = set()
    last_move = None
    for _ in range(budget):
        if last_move is not None and last_move.kind is MoveKind.ASK:
            slot = last_move.asked_slot
            if slot in case.slots:
                utterance = _format_value(case.slots[slot])
            else:
                utterance = f"{slot}=unknown"
            revealed.add(slot)
        else:
            remaining = [s for s in scenario.reveal_order if s in case.slots and s not in revealed]
            if not remaining:
                break
            slot = remaining[0]
            revealed.add(slot)
            utterance = f"{slot}={_format_value(case.slots[slot])}"
        last_move = take_turn(session, utterance)
        if last_move.kind in (MoveKind.ANSWER, MoveKind.REFUSE):
            break
        if session.status is not SessionStatus.OPEN:
            break
    answered = last_move is not None and last_move.kind is MoveKind.ANSWER
    correct = answered and last_move.text == case.expected
    return answered, correct


@dataclass
class BudgetRow:
    budget: int
    cases: int
    answered: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.cases if self.cases else 0.0

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "cases": self.cases,
            "answered": self.answered,
            "correct": self.correct,
            "accuracy": self.accuracy,
        }


@dataclass
class SimulationResult:
    rows: list[BudgetRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["budget,cases,answered,correct,accuracy"]
        for row in self.rows:
            lines.append(
                f"{row.budget},{row.cases},{row.answered},{row.correct},{row.accuracy:.4f}"
            )
        return "\n".join(lines) + "\n"


def run_simulation(scenario: Scenario, max_budget: int = 5) -> SimulationResult:
    if max_budget < 1:
        raise InvalidPayload("turn budget must be at least 1")
    result = SimulationResult()
    for budget in range(1, max_budget + 1):
        answered = 0
        correct = 0
        for index, case in enumerate(scenario.cases):
            got_answer, got_correct = run_case(
                scenario, case, budget, session_id=f"sim-b{budget}-c{index}"
            )
            answered += int(got_answer)
            correct += int(got_correct)
        result.rows.append(
            BudgetRow(budget=budget, cases=len(scenario.cases), answered=answered, correct=correct)
        )
    return result
