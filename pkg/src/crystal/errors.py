"""Exception types raised across the engine.

Every domain failure is a subclass of CrystalError so callers (service,
CLI) can map them to transport-level errors in one place. Exceptions carry
structured fields where a caller needs more than a message (cycle node
ids, parse positions, sequence numbers).
"""

from __future__ import annotations


class CrystalError(Exception):
    """Base class for all engine errors."""


class InvalidConfig(CrystalError):
    pass


# --- graph -----------------------------------------------------------------

class DuplicateId(CrystalError):
    def __init__(self, element_id: str):
        super().__init__(f"id already present: {element_id!r}")
        self.element_id = element_id


class InvalidNode(CrystalError):
    pass


class UnknownNode(CrystalError):
    def __init__(self, node_id: str):
        super().__init__(f"unknown node: {node_id!r}")
        self.node_id = node_id


class UnknownEdge(CrystalError):
    def __init__(self, edge_id: str):
        super().__init__(f"unknown edge: {edge_id!r}")
        self.edge_id = edge_id


class NotFound(CrystalError):
    def __init__(self, target_id: str):
        super().__init__(f"no node or edge with id {target_id!r}")
        self.target_id = target_id


class CycleRejected(CrystalError):
    """Raised when a mutation would close a cycle among Active/Shortcut edges."""

    def __init__(self, cycle: list[str]):
        super().__init__(f"would create cycle through nodes {cycle}")
        self.cycle = list(cycle)


class ConfidenceOutOfRange(CrystalError):
    def __init__(self, value: float):
        super().__init__(f"confidence {value} outside [0, 1]")
        self.value = value


# --- extraction ------------------------------------------------------------

class EmptyCase(CrystalError):
    pass


class InvalidCase(CrystalError):
    pass


class AgentFailure(CrystalError):
    pass


class UnknownStrategy(CrystalError):
    def __init__(self, strategy_id: str):
        super().__init__(f"no prompt strategy registered under {strategy_id!r}")
        self.strategy_id = strategy_id


class ParseError(CrystalError):
    """Outline text did not match the chain outline grammar."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.reason = message


class CorpusFormatError(CrystalError):
    pass


class AllCasesFailed(CrystalError):
    pass


# --- merge -----------------------------------------------------------------

class EmptyInput(CrystalError):
    pass


class EmptyLabel(CrystalError):
    pass


class ZeroEmbedding(CrystalError):
    pass


class PartitionMismatch(CrystalError):
    pass


# --- rules -----------------------------------------------------------------

class DuplicateRuleId(CrystalError):
    def __init__(self, rule_id: str):
        super().__init__(f"rule id already present: {rule_id!r}")
        self.rule_id = rule_id


class ConditionParseError(CrystalError):
    def __init__(self, message: str, col: int):
        super().__init__(f"col {col}: {message}")
        self.col = col
        self.reason = message


class InvalidRule(CrystalError):
    pass


class EmptyRuleSet(CrystalError):
    pass


class ConflictingRules(CrystalError):
    def __init__(self, rule_ids: list[str]):
        super().__init__(f"hard rules disagree on the same condition: {rule_ids}")
        self.rule_ids = list(rule_ids)


# --- evolution / consolidation ----------------------------------------------

class InvalidPayload(CrystalError):
    pass


class PreconditionViolated(CrystalError):
    pass


class NotACandidate(CrystalError):
    pass


class AlreadyResolved(CrystalError):
    def __init__(self, item_id: str):
        super().__init__(f"review item already resolved: {item_id!r}")
        self.item_id = item_id


# --- dialogue ----------------------------------------------------------------

class GraphNotPromoted(CrystalError):
    pass


class NoRoots(CrystalError):
    pass


class SessionClosed(CrystalError):
    pass


class UtteranceParseError(CrystalError):
    pass


class NothingToAsk(CrystalError):
    pass


class PathMismatch(CrystalError):
    pass


# --- persistence -------------------------------------------------------------

class UnknownFormatVersion(CrystalError):
    def __init__(self, found):
        super().__init__(f"unsupported graph file format version: {found!r}")
        self.found = found


class ChecksumMismatch(CrystalError):
    pass


class ValidationFailed(CrystalError):
    def __init__(self, details: list[str]):
        super().__init__("graph failed validation: " + "; ".join(details))
        self.details = list(details)


class CorruptRecord(CrystalError):
    def __init__(self, seq: int, reason: str = ""):
        super().__init__(f"corrupt audit record at seq {seq}: {reason}")
        self.seq = seq


class SequenceGap(CrystalError):
    def __init__(self, expected: int, found: int):
        super().__init__(f"audit sequence gap: expected {expected}, found {found}")
        self.expected = expected
        self.found = found
