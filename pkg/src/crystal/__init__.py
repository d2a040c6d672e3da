"""Crystallized reasoning: auditable weighted reasoning graphs built from
worked cases, executed through dialogue, and reshaped by feedback and review.
"""

from .agents import AgentProfile, PromptStrategy, register_strategy, resolve_strategy
from .canonical import canonical_dumps, checksum_of, unwrap_graph_file, wrap_graph_file
from .consolidation import (
    PruneFinding,
    ReviewItem,
    ReviewKind,
    ReviewStatus,
    detect_jump,
    detect_prune,
)
from .dialogue import (
    Move,
    MoveKind,
    Session,
    SessionManager,
    SessionStatus,
    apply_feedback,
    open_session,
    parse_utterance,
    take_turn,
)
from .engine import ConsolidationReport, EditResult, Engine, JumpCandidate
from .errors import CrystalError
from .evolution import (
    Actor,
    AuditRecord,
    EditKind,
    EditOp,
    Feedback,
    Outcome,
    apply_audit_record,
    feedback_to_delta,
)
from .extraction import (
    CandidateChain,
    Case,
    ChainStep,
    extract_chain,
    extract_corpus,
    load_corpus,
    parse_chain_outline,
    serialize_outline,
)
from .graph import (
    CanvasGraph,
    ChainEdge,
    ChainNode,
    EdgeStatus,
    EngineConfig,
    NodeKind,
    SupportEntry,
    SupportSet,
    ValidationReport,
)
from .merge import MergeReport, align_nodes, embed, merge, similarity
from .rules import (
    AtomicRule,
    RuleAction,
    RuleSet,
    Verdict,
    VerdictKind,
    evaluate_condition,
    graft,
    parse_condition,
    verify_output,
)
from .simulate import Scenario, load_scenario, run_simulation
from .store import GraphStore, load_graph_file, read_audit_log, replay_audit, save_graph_file

__all__ = [
    "Actor",
    "AgentProfile",
    "AtomicRule",
    "AuditRecord",
    "CandidateChain",
    "CanvasGraph",
    "Case",
    "ChainEdge",
    "ChainNode",
    "ChainStep",
    "ConsolidationReport",
    "CrystalError",
    "EditKind",
    "EditOp",
    "EditResult",
    "EdgeStatus",
    "Engine",
    "EngineConfig",
    "Feedback",
    "GraphStore",
    "JumpCandidate",
    "MergeReport",
    "Move",
    "MoveKind",
    "NodeKind",
    "Outcome",
    "PromptStrategy",
    "PruneFinding",
    "ReviewItem",
    "ReviewKind",
    "ReviewStatus",
    "RuleAction",
    "RuleSet",
    "Scenario",
    "Session",
    "SessionManager",
    "SessionStatus",
    "SupportEntry",
    "SupportSet",
    "ValidationReport",
    "Verdict",
    "VerdictKind",
    "align_nodes",
    "apply_audit_record",
    "apply_feedback",
    "canonical_dumps",
    "checksum_of",
    "detect_jump",
    "detect_prune",
    "embed",
    "evaluate_condition",
    "extract_chain",
    "extract_corpus",
    "feedback_to_delta",
    "graft",
    "load_corpus",
    "load_graph_file",
    "load_scenario",
    "merge",
    "open_session",
    "parse_chain_outline",
    "parse_condition",
    "parse_utterance",
    "read_audit_log",
    "register_strategy",
    "replay_audit",
    "resolve_strategy",
    "run_simulation",
    "save_graph_file",
    "serialize_outline",
    "similarity",
    "take_turn",
    "unwrap_graph_file",
    "verify_output",
    "wrap_graph_file",
]
