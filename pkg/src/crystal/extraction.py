"""Case corpus handling and candidate-chain extraction.

Each interaction case is handed to an agent which replies with a numbered
outline; the outline parses into a per-case reasoning tree whose edges carry
a source confidence. Per-case failures never abort a corpus run.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .agents import CASE_OUTCOME_PREFIX, CASE_TURN_PREFIX, AgentProfile
from .errors import (
    AgentFailure,
    AllCasesFailed,
    ConfidenceOutOfRange,
    CorpusFormatError,
    EmptyCase,
    EmptyInput,
    InvalidCase,
    ParseError,
    UnknownStrategy,
)


class Role(str, Enum):
    USER = "User"
    SYSTEM = "System"


@dataclass(frozen=True)
class Turn:
    role: Role
    text: str

    def to_dict(self) -> dict:
        return {"role": self.role.value, "text": self.text}


_CASE_FIELDS = {"case_id", "turns", "outcome_label", "case_type"}
_TURN_FIELDS = {"role", "text"}


@dataclass
class Case:
    """One recorded multi-turn interaction plus its outcome summary."""

    case_id: str
    turns: list[Turn]
    outcome_label: str | None = None
    case_type: str | None = None

    def check(self) -> None:
        if not self.case_id or not str(self.case_id).strip():
            raise InvalidCase("case_id must be non-empty")
        if not self.turns:
            raise EmptyCase(f"case {self.case_id!r} has no turns")
        for i, turn in enumerate(self.turns):
            expected = Role.USER if i % 2 == 0 else Role.SYSTEM
            if turn.role is not expected:
                raise InvalidCase(
                    f"case {self.case_id!r}: turn {i} has role {turn.role.value}, "
                    f"expected {expected.value} (roles alternate starting with User)"
                )
            if not turn.text or not turn.text.strip():
                raise InvalidCase(f"case {self.case_id!r}: turn {i} has empty text")

    def turn_pairs(self) -> list[tuple[str, str]]:
        pairs = []
        for i in range(0, len(self.turns) - 1, 2):
            pairs.append((self.turns[i].text, self.turns[i + 1].text))
        return pairs

    def to_dict(self) -> dict:
        out: dict = {"case_id": self.case_id, "turns": [t.to_dict() for t in self.turns]}
        if self.outcome_label is not None:
            out["outcome_label"] = self.outcome_label
        if self.case_type is not None:
            out["case_type"] = self.case_type
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Case":
        if not isinstance(raw, Mapping):
            raise CorpusFormatError(f"case entry must be an object, got {type(raw).__name__}")
        unknown = set(raw) - _CASE_FIELDS
        if unknown:
            raise CorpusFormatError(f"unknown case fields: {sorted(unknown)}")
        turns_raw = raw.get("turns")
        if not isinstance(turns_raw, list):
            raise CorpusFormatError("case 'turns' must be an array")
        turns = []
        for i, t in enumerate(turns_raw):
            if not isinstance(t, Mapping):
                raise CorpusFormatError(f"turn {i} must be an object")
            extra = set(t) - _TURN_FIELDS
            if extra:
                raise CorpusFormatError(f"turn {i}: unknown fields {sorted(extra)}")
            try:
                role = Role(t.get("role"))
            except ValueError:
                raise CorpusFormatError(f"turn {i}: role must be User or System") from None
            text = t.get("text")
            if not isinstance(text, str):
                raise CorpusFormatError(f"turn {i}: text must be a string")
            turns.append(Turn(role=role, text=text))
        case_id = raw.get("case_id")
        if not isinstance(case_id, str):
            raise CorpusFormatError("case_id must be a string")
        outcome = raw.get("outcome_label")
        if outcome is not None and not isinstance(outcome, str):
            raise CorpusFormatError("outcome_label must be a string when present")
        case_type = raw.get("case_type")
        if case_type is not None and not isinstance(case_type, str):
            raise CorpusFormatError("case_type must be a string when present")
        return cls(case_id=case_id, turns=turns, outcome_label=outcome, case_type=case_type)


def load_corpus(text: str) -> list[Case]:
    """Parse a corpus document: one JSON array of cases, unknown fields rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise CorpusFormatError(f"corpus is not valid JSON: {err}") from err
    if not isinstance(raw, list):
        raise CorpusFormatError("corpus document must be a JSON array of cases")
    return [Case.from_dict(entry) for entry in raw]


@dataclass
class ChainStep:
    """One node of a candidate chain; the edge from its parent carries P_k."""

    id: str
    label: str
    parent_id: str | None = None
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "parent_id": self.parent_id,
            "confidence": float(self.confidence),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ChainStep":
        return cls(
            id=raw["id"],
            label=raw["label"],
            parent_id=raw.get("parent_id"),
            confidence=float(raw.get("confidence", 1.0)),
        )


@dataclass
class CandidateChain:
    """A rooted per-case reasoning tree in document (pre-)order.

    Leaf steps act as terminals, interior steps as actions; the distinction
    is structural, so outline round-trips cannot lose it.
    """

    chain_id: str
    steps: list[ChainStep] = field(default_factory=list)
    source_case_id: str | None = None

    def check(self) -> None:
        if not self.steps:
            raise InvalidCase(f"chain {self.chain_id!r} has no steps")
        seen: set[str] = set()
        roots = 0
        for step in self.steps:
            if step.id in seen:
                raise InvalidCase(f"chain {self.chain_id!r}: duplicate step id {step.id!r}")
            if not step.label or not step.label.strip():
                raise InvalidCase(f"chain {self.chain_id!r}: step {step.id!r} has empty label")
            if step.parent_id is None:
                roots += 1
            elif step.parent_id not in seen:
                # parent must precede child, which also rules out cycles
                raise InvalidCase(
                    f"chain {self.chain_id!r}: step {step.id!r} references "
                    f"parent {step.parent_id!r} not seen earlier"
                )
            if math.isnan(step.confidence) or not (0.0 <= step.confidence <= 1.0):
                raise ConfidenceOutOfRange(step.confidence)
            seen.add(step.id)
        if roots != 1:
            raise InvalidCase(f"chain {self.chain_id!r} has {roots} roots, expected exactly 1")

    @property
    def root_id(self) -> str:
        return next(s.id for s in self.steps if s.parent_id is None)

    def children_of(self, step_id: str | None) -> list[ChainStep]:
        return [s for s in self.steps if s.parent_id == step_id]

    def kind_of(self, step_id: str) -> str:
        return "Terminal" if not self.children_of(step_id) else "Action"

    def step(self, step_id: str) -> ChainStep:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise InvalidCase(f"chain {self.chain_id!r}: no step {step_id!r}")

    def edges(self) -> list[tuple[str, str, float]]:
        """(parent_id, child_id, P_k) triples in document order."""
        return [(s.parent_id, s.id, s.confidence) for s in self.steps if s.parent_id is not None]

    def to_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "source_case_id": self.source_case_id,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "CandidateChain":
        chain = cls(
            chain_id=raw["chain_id"],
            steps=[ChainStep.from_dict(s) for s in raw.get("steps", [])],
            source_case_id=raw.get("source_case_id"),
        )
        chain.check()
        return chain


_LINE_RE = re.compile(r"^(?P<index>\d+(?:\.\d+)*)\.?[ \t]+(?P<rest>\S.*)$")


def parse_chain_outline(
    text: str, chain_id: str = "outline", source_case_id: str | None = None
) -> CandidateChain:
    """Parse numbered outline text into a candidate chain.

    Grammar: each line is a dot-nested index, whitespace, a label, and an
    optional " @confidence" suffix. Depth equals the number of index
    components. A confidence on the root line is range-checked and dropped
    since the root has no incoming edge.
    """
    steps: list[ChainStep] = []
    # stack of (depth, step_id) from root to the last parsed step
    stack: list[tuple[int, str]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        match = _LINE_RE.match(line)
        if match is None:
            raise ParseError(
                f"line does not match 'index label [@confidence]': {line!r}", line=line_no, col=1
            )
        rest = match.group("rest").rstrip()
        confidence = 1.0
        if " @" in rest:
            label_part, conf_part = rest.rsplit(" @", 1)
            col = len(line) - len(conf_part)
            try:
                confidence = float(conf_part)
            except ValueError:
                raise ParseError(
                    f"malformed confidence suffix {conf_part!r}", line=line_no, col=col
                ) from None
            if math.isnan(confidence) or not (0.0 <= confidence <= 1.0):
                raise ConfidenceOutOfRange(confidence)
            rest = label_part.rstrip()
        if not rest:
            raise ParseError("empty label", line=line_no, col=match.start("rest") + 1)
        depth = match.group("index").count(".") + 1
        if not steps:
            if depth != 1:
                raise ParseError("first line must be a depth-1 root", line=line_no, col=1)
            step = ChainStep(id="s0000", label=rest, parent_id=None, confidence=1.0)
            steps.append(step)
            stack = [(1, step.id)]
            continue
        if depth == 1:
            raise ParseError("multiple depth-1 root lines", line=line_no, col=1)
        while stack and stack[-1][0] >= depth:
            stack.pop()
        if not stack or stack[-1][0] != depth - 1:
            raise ParseError(
                f"line at depth {depth} does not extend a depth-{depth - 1} parent",
                line=line_no,
                col=1,
            )
        step = ChainStep(
            id=f"s{len(steps):04d}", label=rest, parent_id=stack[-1][1], confidence=confidence
        )
        steps.append(step)
        stack.append((depth, step.id))
    if not steps:
        raise ParseError("outline has no root line", line=1, col=1)
    chain = CandidateChain(chain_id=chain_id, steps=steps, source_case_id=source_case_id)
    chain.check()
    return chain


def serialize_outline(chain: CandidateChain) -> str:
    """Render a chain back to outline text; inverse of parse_chain_outline."""
    chain.check()
    lines: list[str] = []

    def emit(step: ChainStep, index: list[int]) -> None:
        depth = len(index)
        index_text = ".".join(str(i) for i in index)
        prefix = f"{index_text}. " if depth == 1 else f"{index_text} "
        suffix = "" if step.confidence == 1.0 else f" @{step.confidence!r}"
        lines.append(f"{prefix}{step.label}{suffix}")
        for child_pos, child in enumerate(chain.children_of(step.id), start=1):
            emit(child, index + [child_pos])

    emit(chain.step(chain.root_id), [1])
    return "\n".join(lines)


def render_case_block(case: Case) -> str:
    """Flatten a case into the transcript block embedded in prompts."""
    lines = []
    for turn in case.turns:
        prefix = "User: " if turn.role is Role.USER else CASE_TURN_PREFIX
        lines.append(prefix + turn.text.replace("\n", " "))
    if case.outcome_label:
        lines.append(CASE_OUTCOME_PREFIX + case.outcome_label.replace("\n", " "))
    return "\n".join(lines)


def extract_chain(agent: AgentProfile, case: Case, chain_id: str | None = None) -> CandidateChain:
    """Run one agent over one case and parse the reply into a chain."""
    case.check()
    strategy = agent.strategy()
    prompt = strategy.build_case_prompt(render_case_block(case))
    reply = agent.respond(prompt)
    return parse_chain_outline(
        reply, chain_id=chain_id or case.case_id, source_case_id=case.case_id
    )


@dataclass
class CaseFailure:
    case_id: str
    error: str

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "error": self.error}


@dataclass
class ExtractionResult:
    chains: list[CandidateChain]
    failures: list[CaseFailure]

    def to_dict(self) -> dict:
        return {
            "chains": [c.to_dict() for c in self.chains],
            "failures": [f.to_dict() for f in self.failures],
        }


def select_agent(agents: list[AgentProfile], case: Case) -> AgentProfile:
    """First agent whose strategy covers the case's type, else the default."""
    if case.case_type is not None:
        for agent in agents:
            try:
                if case.case_type in agent.strategy().case_types:
                    return agent
            except UnknownStrategy:
                continue
    return agents[0]


def extract_corpus(agents: list[AgentProfile], corpus: list[Case]) -> ExtractionResult:
    """Extract one chain per case, collecting per-case failures instead of
    aborting; chain ids are suffixed with the corpus position so duplicate
    cases still yield distinct ids."""
    if not agents:
        raise EmptyInput("at least one agent profile is required")
    if not corpus:
        raise EmptyInput("corpus is empty")
    chains: list[CandidateChain] = []
    failures: list[CaseFailure] = []
    for i, case in enumerate(corpus):
        agent = select_agent(agents, case)
        try:
            chains.append(extract_chain(agent, case, chain_id=f"{case.case_id}-{i:03d}"))
        except (
            EmptyCase,
            InvalidCase,
            AgentFailure,
            ParseError,
            ConfidenceOutOfRange,
            UnknownStrategy,
        ) as err:
            failures.append(CaseFailure(case_id=case.case_id, error=f"{type(err).__name__}: {err}"))
    if not chains:
        raise AllCasesFailed(f"all {len(corpus)} cases failed extraction")
    return ExtractionResult(chains=chains, failures=failures)
