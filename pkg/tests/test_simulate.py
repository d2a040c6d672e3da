"""Scenario loading, scripted case play, and the accuracy-vs-budget curve."""

import json
from pathlib import Path

import pytest

from crystal.errors import InvalidPayload
from crystal.simulate import (
    BudgetRow,
    ScenarioCase,
    SimulationResult,
    load_scenario,
    load_scenario_text,
    run_case,
    run_simulation,
)

SCENARIO_PATH = Path(__file__).parent.parent / "scenarios" / "triage.json"

RULES = [
    {
        "rule_id": "r-dizzy-mild",
        "condition": "slot(symptom) == 'dizziness' and slot(severity) == 'mild'",
        "action": {"kind": "RouteTo", "label": "rest and fluids"},
        "hardness": "Hard",
    },
    {
        "rule_id": "r-dizzy-severe",
        "condition": "slot(symptom) == 'dizziness' and slot(severity) == 'severe'",
        "action": {"kind": "RouteTo", "label": "emergency referral"},
        "hardness": "Hard",
    },
]

CASES = [
    {"slots": {"symptom": "dizziness", "severity": "mild"}, "expected": "rest and fluids"},
    {"slots": {"symptom": "dizziness", "severity": "severe"}, "expected": "emergency referral"},
]


def rules_scenario(cases=None, **extra):
    return load_scenario({"rules": RULES, "cases": cases or CASES, **extra})


# ---------------------------------------------------------------- loading


def test_rules_scenario_grafts_a_promoted_graph():
    scenario = rules_scenario()
    assert scenario.graph.promoted is True
    assert len(scenario.ruleset.rules) == 2
    assert scenario.reveal_order == ["severity", "symptom"]


def test_explicit_reveal_order_is_kept():
    scenario = rules_scenario(reveal_order=["symptom", "severity"])
    assert scenario.reveal_order == ["symptom", "severity"]


def test_chains_scenario_merges_and_promotes():
    chain = {
        "chain_id": "c1",
        "steps": [
            {"id": "s0", "label": "check onset", "parent_id": None},
            {"id": "s1", "label": "advise rest", "parent_id": "s0"},
        ],
    }
    scenario = load_scenario(
        {"chains": [chain], "cases": [{"slots": {}, "expected": "advise rest"}]}
    )
    assert scenario.graph.promoted is True
    assert scenario.ruleset.rules == ()


def test_scenario_needs_a_graph_source():
    with pytest.raises(InvalidPayload, match="rules or chains"):
        load_scenario({"cases": CASES})


def test_scenario_needs_cases():
    with pytest.raises(InvalidPayload, match="no cases"):
        load_scenario({"rules": RULES, "cases": []})


def test_scenario_text_must_be_json():
    with pytest.raises(InvalidPayload, match="not valid JSON"):
        load_scenario_text("{nope")


# ---------------------------------------------------------------- single cases


def test_two_slot_case_needs_two_turns():
    scenario = rules_scenario(reveal_order=["symptom", "severity"])
    case = ScenarioCase(slots=CASES[0]["slots"], expected=CASES[0]["expected"])
    assert run_case(scenario, case, budget=1, session_id="t1") == (False, False)
    assert run_case(scenario, case, budget=2, session_id="t2") == (True, True)


def test_wrong_expectation_counts_answered_but_not_correct():
    scenario = rules_scenario(reveal_order=["symptom", "severity"])
    case = ScenarioCase(slots=CASES[0]["slots"], expected="something else")
    assert run_case(scenario, case, budget=3, session_id="t3") == (True, False)


def test_missing_asked_fact_is_answered_with_unknown():
    # the engine asks for severity, the script knows nothing, the walk dead-ends
    scenario = rules_scenario(reveal_order=["symptom"])
    case = ScenarioCase(slots={"symptom": "dizziness"}, expected="rest and fluids")
    assert run_case(scenario, case, budget=5, session_id="t4") == (False, False)


def test_extra_budget_does_not_change_a_settled_case():
    scenario = rules_scenario(reveal_order=["symptom", "severity"])
    case = ScenarioCase(slots=CASES[1]["slots"], expected=CASES[1]["expected"])
    assert run_case(scenario, case, budget=50, session_id="t5") == (True, True)


# ---------------------------------------------------------------- the curve


def test_simulation_rows_cover_every_budget():
    result = run_simulation(rules_scenario(), max_budget=3)
    assert [row.budget for row in result.rows] == [1, 2, 3]
    assert all(row.cases == len(CASES) for row in result.rows)


def test_budget_must_be_positive():
    with pytest.raises(InvalidPayload, match="at least 1"):
        run_simulation(rules_scenario(), max_budget=0)


def test_accuracy_handles_an_empty_denominator():
    assert BudgetRow(budget=1, cases=0, answered=0, correct=0).accuracy == 0.0


def test_csv_uses_fixed_precision():
    result = SimulationResult(rows=[BudgetRow(budget=1, cases=3, answered=2, correct=2)])
    assert result.to_csv() == "budget,cases,answered,correct,accuracy\n1,3,2,2,0.6667\n"


def test_bundled_scenario_climbs_monotonically_to_full_accuracy():
    scenario = load_scenario_text(SCENARIO_PATH.read_text(encoding="utf-8"))
    result = run_simulation(scenario, max_budget=5)
    accuracies = [row.accuracy for row in result.rows]
    assert accuracies == [0.0, 0.5, 1.0, 1.0, 1.0]
    assert all(b >= a for a, b in zip(accuracies, accuracies[1:]))
    assert accuracies[-1] >= 0.95
