"""Pluggable generative responders and the prompt strategies that drive them.

A responder is one function from prompt text to reply text. The engine owns
prompt construction and reply parsing, so providers stay swappable and the
reference responder keeps every test deterministic.
"""

from __future__ import annotations

import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable

from .errors import AgentFailure, UnknownStrategy

# Markers the reference responder keys on inside rendered prompts.
CASE_TURN_PREFIX = "System: "
CASE_OUTCOME_PREFIX = "Outcome: "
CONTINUATION_MARKER = "Continue the outline from: "


@dataclass(frozen=True)
class PromptStrategy:
    """A named prompt recipe plus the case tags it specializes in."""

    strategy_id: str
    case_types: frozenset[str] = frozenset()
    preamble: str = "Read the case transcript and produce a numbered reasoning outline."
    instruction: str = "Reply with one outline line per reasoning step."

    def build_case_prompt(self, case_block: str) -> str:
        return f"{self.preamble}\n\n{case_block}\n\n{self.instruction}"

    def build_continuation_prompt(self, node_label: str, slots: dict) -> str:
        lines = [self.preamble, "", CONTINUATION_MARKER + node_label.replace("\n", " ")]
        for name in sorted(slots):
            lines.append(f"Known: {name}={slots[name]}")
        lines.append("")
        lines.append(self.instruction)
        return "\n".join(lines)


_STRATEGIES: dict[str, PromptStrategy] = {}


def register_strategy(strategy: PromptStrategy) -> None:
    _STRATEGIES[strategy.strategy_id] = strategy


def resolve_strategy(strategy_id: str) -> PromptStrategy:
    try:
        return _STRATEGIES[strategy_id]
    except KeyError:
        raise UnknownStrategy(strategy_id) from None


def registered_strategies() -> list[str]:
    return sorted(_STRATEGIES)


register_strategy(PromptStrategy("baseline"))
register_strategy(
    PromptStrategy(
        "triage",
        case_types=frozenset({"triage", "diagnostic"}),
        preamble="You are assisting with symptom triage. Outline the checks performed.",
    )
)
register_strategy(
    PromptStrategy(
        "dispute",
        case_types=frozenset({"dispute", "contract"}),
        preamble="You are reviewing a dispute record. Outline the resolution steps taken.",
    )
)


def reference_responder(prompt: str) -> str:
    """Deterministic stand-in for a generative model.

    Case prompts: one outline step per transcript reply line, nested linearly,
    with the outcome line as the final step. Continuation prompts: a fixed
    two-step probe anchored on the dead-end node's label.
    """
    for line in prompt.splitlines():
        if line.startswith(CONTINUATION_MARKER):
            anchor = line[len(CONTINUATION_MARKER):].strip() or "the current step"
            return f"1. examine details beyond {anchor}\n1.1 defer to expert review"
    steps: list[str] = []
    for line in prompt.splitlines():
        if line.startswith(CASE_TURN_PREFIX):
            steps.append(line[len(CASE_TURN_PREFIX):].strip())
        elif line.startswith(CASE_OUTCOME_PREFIX):
            tail = line[len(CASE_OUTCOME_PREFIX):].strip()
            if tail:
                steps.append(tail)
    out: list[str] = []
    for depth, label in enumerate(steps, start=1):
        index = ".".join(["1"] * depth)
        out.append(f"{index}. {label}" if depth == 1 else f"{index} {label}")
    return "\n".join(out)


class HttpResponder:
    """Minimal network adapter: POSTs the prompt, returns the body as text."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, prompt: str) -> str:
        request = urllib.request.Request(
            self.url, data=prompt.encode("utf-8"), headers={"Content-Type": "text/plain"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return response.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as err:
            raise AgentFailure(f"responder at {self.url} unavailable: {err}") from err


@dataclass
class AgentProfile:
    """Identity plus strategy for one extraction or exploration agent."""

    agent_id: str
    strategy_id: str = "baseline"
    description: str = ""
    responder: Callable[[str], str] | None = field(default=None, repr=False)

    def respond(self, prompt: str) -> str:
        responder = self.responder or reference_responder
        try:
            return responder(prompt)
        except AgentFailure:
            raise
        except Exception as err:
            raise AgentFailure(f"agent {self.agent_id!r} responder failed: {err}") from err

    def strategy(self) -> PromptStrategy:
        return resolve_strategy(self.strategy_id)
