"""Single-writer engine around one graph: every mutation is staged on a
clone, validated, committed, and appended to the audit trail in one step.

Rejected attempts are recorded too, with the same sequence numbering, so the
trail is a complete account of what was tried, not only of what stuck.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .agents import AgentProfile
from .consolidation import (
    ReviewItem,
    ReviewKind,
    ReviewStatus,
    detect_jump,
    detect_prune,
    is_jump_candidate,
    prune_item_evidence,
    shortcut_payload,
)
from .errors import (
    AlreadyResolved,
    ConfidenceOutOfRange,
    CycleRejected,
    DuplicateId,
    InvalidNode,
    InvalidPayload,
    NotACandidate,
    NotFound,
    PreconditionViolated,
    UnknownEdge,
    UnknownNode,
    ValidationFailed,
)
from .evolution import (
    Actor,
    AuditRecord,
    EditOp,
    SYSTEM_ACTOR,
    apply_audit_record,
    next_confidence,
    next_weight,
    rejected,
)
from .extraction import parse_chain_outline
from .graph import TRAVERSABLE, CanvasGraph, EngineConfig
from .rules import evaluate_condition, parse_condition


@dataclass
class EditResult:
    applied: bool
    seq: int
    version: int
    reason: str | None = None
    detail: str | None = None
    cycle: list[str] | None = None
    created_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "applied": self.applied,
            "seq": self.seq,
            "version": self.version,
            "reason": self.reason,
            "detail": self.detail,
            "cycle": self.cycle,
            "created_id": self.created_id,
        }


@dataclass
class JumpCandidate:
    nodes: list[str]
    detected_version: int


@dataclass
class ConsolidationReport:
    compressed: list[dict] = field(default_factory=list)
    prune_items: list[ReviewItem] = field(default_factory=list)
    scan_count: int = 0

    def to_dict(self) -> dict:
        return {
            "compressed": self.compressed,
            "prune_items": [i.to_dict() for i in self.prune_items],
            "scan_count": self.scan_count,
        }


class Engine:
    """Owns one graph plus its audit records, review queue, and prune-scan
    bookkeeping. All mutations pass through one lock."""

    def __init__(
        self,
        graph: CanvasGraph,
        config: EngineConfig,
        audit_sink: Callable[[AuditRecord], None] | None = None,
    ):
        self.graph = graph
        self.config = config
        self.records: list[AuditRecord] = []
        self.reviews: dict[str, ReviewItem] = {}
        self.prune_scan_count = 0
        self.explorer: AgentProfile | None = None  # agent used at dialogue dead ends
        self._audit_sink = audit_sink
        self._lock = threading.RLock()

    # -- construction ----------------------------------------------------

    @classmethod
    def create(
        cls,
        graph: CanvasGraph,
        config: EngineConfig,
        audit_sink: Callable[[AuditRecord], None] | None = None,
        review_specs: list[dict] | None = None,
    ) -> "Engine":
        """Adopt a freshly built graph: version normalized to 1, the full
        snapshot written as the first audit record."""
        graph.version = 1
        engine = cls(graph, config, audit_sink)
        record = AuditRecord(
            seq=1,
            timestamp=time.time(),
            graph_id=graph.graph_id,
            pre_version=0,
            op={
                "op_kind": "InitGraph",
                "actor": SYSTEM_ACTOR.to_dict(),
                "payload": {"graph": graph.to_dict()},
            },
        )
        engine._append(record)
        for spec in review_specs or []:
            engine.open_review(
                ReviewKind(spec["kind"]), spec.get("subject_ids", []), spec.get("evidence", {})
            )
        return engine

    @classmethod
    def resume(
        cls,
        graph: CanvasGraph,
        config: EngineConfig,
        records: list[AuditRecord],
        reviews: list[ReviewItem],
        prune_scan_count: int = 0,
        audit_sink: Callable[[AuditRecord], None] | None = None,
    ) -> "Engine":
        engine = cls(graph, config, audit_sink)
        engine.records = list(records)
        engine.reviews = {item.item_id: item for item in reviews}
        engine.prune_scan_count = prune_scan_count
        return engine

    # -- audit plumbing -----------------------------------------------------

    def _append(self, record: AuditRecord) -> None:
        self.records.append(record)
        if self._audit_sink is not None:
            self._audit_sink(record)

    def _next_seq(self) -> int:
        return len(self.records) + 1

    def _attempt(self, op: dict) -> tuple[AuditRecord, Exception | None]:
        """Stage the op on a clone, validate, and either commit or record the
        rejection. Returns the record and the rejection error, if any."""
        record = AuditRecord(
            seq=self._next_seq(),
            timestamp=time.time(),
            graph_id=self.graph.graph_id,
            pre_version=self.graph.version,
            op=op,
        )
        staged = self.graph.clone()
        try:
            staged = apply_audit_record(staged, record)
        except (
            InvalidPayload,
            UnknownNode,
            UnknownEdge,
            InvalidNode,
            ConfidenceOutOfRange,
            CycleRejected,
            DuplicateId,
        ) as err:
            record.result = rejected(type(err).__name__, str(err))
            self._append(record)
            return record, err
        except (KeyError, TypeError, ValueError) as err:
            wrapped = InvalidPayload(f"malformed payload: {err!r}")
            record.result = rejected("InvalidPayload", str(wrapped))
            self._append(record)
            return record, wrapped
        report = staged.validate()
        if not report.is_empty:
            if report.cycles:
                err = CycleRejected(report.cycles[0])
                record.result = rejected("CycleRejected", str(err))
            else:
                err = ValidationFailed(report.describe())
                record.result = rejected("ValidationFailed", str(err))
            self._append(record)
            return record, err
        self.graph = staged
        self._append(record)
        return record, None

    # -- expert edits -------------------------------------------------------

    def apply_edit(self, op: EditOp) -> EditResult:
        """Apply one edit atomically; rejections come back in the result, and
        both outcomes land in the audit trail."""
        with self._lock:
            payload = dict(op.payload)
            created_id = None
            if op.kind.value == "AddNode" and isinstance(payload.get("node"), dict):
                node_payload = dict(payload["node"])
                if not node_payload.get("id"):
                    node_payload["id"] = self.graph.allocate_node_id()
                created_id = node_payload["id"]
                payload["node"] = node_payload
            if op.kind.value == "AddEdge" and isinstance(payload.get("edge"), dict):
                edge_payload = dict(payload["edge"])
                if not edge_payload.get("id"):
                    edge_payload["id"] = self.graph.allocate_edge_id()
                edge_payload.setdefault("status", "Active")
                edge_payload.setdefault("weight", 0.0)
                created_id = edge_payload["id"]
                payload["edge"] = edge_payload
            record, err = self._attempt(
                {"op_kind": op.kind.value, "actor": op.actor.to_dict(), "payload": payload}
            )
            if err is None:
                return EditResult(
                    applied=True, seq=record.seq, version=self.graph.version,
                    created_id=created_id,
                )
            return EditResult(
                applied=False,
                seq=record.seq,
                version=self.graph.version,
                reason=record.result.get("reason"),
                detail=record.result.get("detail"),
                cycle=err.cycle if isinstance(err, CycleRejected) else None,
            )

    # -- confidence and weight ------------------------------------------------

    def update_confidence(self, edge_id: str, delta_p: float, actor: Actor = SYSTEM_ACTOR) -> float:
        with self._lock:
            if edge_id not in self.graph.edges:
                self._reject_missing_edge("ConfidenceUpdate", edge_id, actor)
            new_value = next_confidence(self.graph.edges[edge_id].confidence, delta_p, self.config)
            _, err = self._attempt(
                {
                    "op_kind": "ConfidenceUpdate",
                    "actor": actor.to_dict(),
                    "payload": {"edge_id": edge_id, "delta_p": delta_p, "new_confidence": new_value},
                }
            )
            if err is not None:
                raise err
            return new_value

    def accumulate_weight(self, edge_id: str, delta_w: float, actor: Actor = SYSTEM_ACTOR) -> float:
        with self._lock:
            if edge_id not in self.graph.edges:
                self._reject_missing_edge("WeightUpdate", edge_id, actor)
            new_value = next_weight(self.graph.edges[edge_id].weight, delta_w)
            _, err = self._attempt(
                {
                    "op_kind": "WeightUpdate",
                    "actor": actor.to_dict(),
                    "payload": {"edge_id": edge_id, "delta_w": delta_w, "new_weight": new_value},
                }
            )
            if err is not None:
                raise err
            return new_value

    def _reject_missing_edge(self, op_kind: str, edge_id: str, actor: Actor) -> None:
        record = AuditRecord(
            seq=self._next_seq(),
            timestamp=time.time(),
            graph_id=self.graph.graph_id,
            pre_version=self.graph.version,
            op={"op_kind": op_kind, "actor": actor.to_dict(), "payload": {"edge_id": edge_id}},
            result=rejected("UnknownEdge", f"no edge {edge_id!r}"),
        )
        self._append(record)
        raise UnknownEdge(edge_id)

    # -- reviews -----------------------------------------------------------

    def open_review(self, kind: ReviewKind, subject_ids: list[str], evidence: dict) -> ReviewItem:
        with self._lock:
            item = ReviewItem(
                item_id=f"rv{len(self.reviews):04d}",
                kind=kind,
                subject_ids=list(subject_ids),
                evidence=evidence,
            )
            self.reviews[item.item_id] = item
            return item

    def pending_reviews(self) -> list[ReviewItem]:
        return [i for i in self.reviews.values() if i.status is ReviewStatus.PENDING]

    def resolve_review(self, item_id: str, verdict: str, actor: Actor = SYSTEM_ACTOR) -> ReviewItem:
        """Approve or reject a pending item; graph effects depend on its kind
        and go through the same audited commit path as everything else."""
        if verdict not in ("Approve", "Reject"):
            raise InvalidPayload(f"verdict must be Approve or Reject, got {verdict!r}")
        with self._lock:
            item = self.reviews.get(item_id)
            if item is None:
                raise NotFound(item_id)
            if item.status is not ReviewStatus.PENDING:
                raise AlreadyResolved(item_id)
            payload: dict = {"item_id": item_id, "verdict": verdict}
            if item.kind is ReviewKind.PRUNE_CANDIDATE and verdict == "Approve":
                payload["retire_edges"] = [
                    e for e in item.subject_ids if e in self.graph.edges
                ]
            elif item.kind is ReviewKind.EXPLORATION_PROPOSAL:
                edge_ids = item.evidence.get("edge_ids", [])
                present = [e for e in edge_ids if e in self.graph.edges]
                if verdict == "Approve":
                    payload["promote_edges"] = present
                else:
                    payload["retire_edges"] = present
            elif item.kind is ReviewKind.MERGE_VERIFICATION and verdict == "Approve":
                payload["promote_graph"] = True
            _, err = self._attempt(
                {"op_kind": "ResolveReview", "actor": actor.to_dict(), "payload": payload}
            )
            if err is not None:
                raise err  # item stays Pending; the attempt is on record
            item.status = ReviewStatus.APPROVED if verdict == "Approve" else ReviewStatus.REJECTED
            if item.kind is ReviewKind.PRUNE_CANDIDATE and verdict == "Reject":
                item.cooldown_until_turn = self.prune_scan_count + self.config.prune_cooldown_turns
            return item

    # -- exploration ---------------------------------------------------------

    def satisfying_edges(self, node_id: str, slots: dict) -> list:
        """Traversable out-edges whose guards pass under the given slots."""
        out = []
        for edge in self.graph.out_edges(node_id, TRAVERSABLE):
            if edge.guard is None or evaluate_condition(parse_condition(edge.guard), slots):
                out.append(edge)
        return out

    def explore(self, anchor_node_id: str, agent: AgentProfile, slots: dict) -> ReviewItem:
        """Ask the agent for a continuation at a dead end and stage it as
        Provisional structure plus a review item. Nothing Active changes."""
        with self._lock:
            if anchor_node_id not in self.graph.nodes:
                raise UnknownNode(anchor_node_id)
            if self.satisfying_edges(anchor_node_id, slots):
                raise PreconditionViolated(
                    f"node {anchor_node_id!r} already has a satisfying edge"
                )
            anchor = self.graph.nodes[anchor_node_id]
            prompt = agent.strategy().build_continuation_prompt(anchor.label, slots)
            reply = agent.respond(prompt)  # AgentFailure propagates, no mutation
            chain = parse_chain_outline(reply, chain_id=f"explore-{anchor_node_id}")
            node_ids: dict[str, str] = {}
            nodes_payload = []
            edges_payload = []
            next_node = len(self.graph.nodes)
            next_edge = len(self.graph.edges)
            for step in chain.steps:
                node_id = f"n{next_node:04d}"
                while node_id in self.graph.nodes:
                    next_node += 1
                    node_id = f"n{next_node:04d}"
                next_node += 1
                node_ids[step.id] = node_id
                nodes_payload.append(
                    {
                        "id": node_id,
                        "kind": chain.kind_of(step.id),
                        "label": step.label,
                        "slot_key": None,
                        "provenance": ["explored"],
                    }
                )
            for step in chain.steps:
                from_id = anchor_node_id if step.parent_id is None else node_ids[step.parent_id]
                edge_id = f"e{next_edge:04d}"
                while edge_id in self.graph.edges:
                    next_edge += 1
                    edge_id = f"e{next_edge:04d}"
                next_edge += 1
                edges_payload.append(
                    {
                        "id": edge_id,
                        "from": from_id,
                        "to": node_ids[step.id],
                        "confidence": self.config.initial_confidence_p0,
                        "weight": 0.0,
                        "guard": None,
                        "status": "Provisional",
                        "support": {"entries": []},
                        "shortcut_provenance": None,
                    }
                )
            _, err = self._attempt(
                {
                    "op_kind": "AttachExploration",
                    "actor": Actor(kind="Agent", actor_id=agent.agent_id).to_dict(),
                    "payload": {
                        "anchor": anchor_node_id,
                        "nodes": nodes_payload,
                        "edges": edges_payload,
                    },
                }
            )
            if err is not None:
                raise err
            return self.open_review(
                ReviewKind.EXPLORATION_PROPOSAL,
                subject_ids=[n["id"] for n in nodes_payload] + [e["id"] for e in edges_payload],
                evidence={
                    "anchor": anchor_node_id,
                    "agent_id": agent.agent_id,
                    "edge_ids": [e["id"] for e in edges_payload],
                    "node_ids": [n["id"] for n in nodes_payload],
                },
            )

    # -- consolidation ----------------------------------------------------------

    def compress_subpath(self, candidate: JumpCandidate) -> str:
        """Turn a verified habitual chain into one Shortcut edge, retiring the
        originals, in a single audited commit."""
        with self._lock:
            if candidate.detected_version != self.graph.version:
                raise NotACandidate(
                    f"graph moved from version {candidate.detected_version} "
                    f"to {self.graph.version}"
                )
            if not is_jump_candidate(self.graph, candidate.nodes, self.config):
                raise NotACandidate(f"{candidate.nodes} is not a compressible chain")
            payload = shortcut_payload(self.graph, candidate.nodes)
            edge_id = self.graph.allocate_edge_id()
            shortcut = {
                "id": edge_id,
                "from": payload["from_id"],
                "to": payload["to_id"],
                "confidence": payload["confidence"],
                "weight": payload["weight"],
                "guard": payload["guard"],
                "status": "Shortcut",
                "support": {"entries": []},
                "shortcut_provenance": payload["shortcut_provenance"],
            }
            _, err = self._attempt(
                {
                    "op_kind": "CompressSubpath",
                    "actor": SYSTEM_ACTOR.to_dict(),
                    "payload": {
                        "chain": list(candidate.nodes),
                        "shortcut": shortcut,
                        "retire": payload["retire"],
                    },
                }
            )
            if err is not None:
                raise err
            return edge_id

    def consolidate(self) -> ConsolidationReport:
        """One maintenance pass: compress every habitual chain, then scan for
        prune candidates and queue them for expert review."""
        with self._lock:
            report = ConsolidationReport()
            for chain in detect_jump(self.graph, self.config):
                candidate = JumpCandidate(nodes=chain, detected_version=self.graph.version)
                edge_id = self.compress_subpath(candidate)
                report.compressed.append({"chain": chain, "shortcut_edge": edge_id})
            self.prune_scan_count += 1
            report.scan_count = self.prune_scan_count
            skip = set()
            for item in self.reviews.values():
                if item.kind is not ReviewKind.PRUNE_CANDIDATE:
                    continue
                triple = tuple(item.evidence.get("triple", ()))
                if len(triple) != 3:
                    continue
                if item.status is ReviewStatus.PENDING:
                    skip.add(triple)
                elif (
                    item.status is ReviewStatus.REJECTED
                    and self.prune_scan_count <= item.cooldown_until_turn
                ):
                    skip.add(triple)
            for finding in detect_prune(self.graph, self.config, frozenset(skip)):
                item = self.open_review(
                    ReviewKind.PRUNE_CANDIDATE,
                    subject_ids=[finding.edge_ik, finding.edge_kj],
                    evidence=prune_item_evidence(finding),
                )
                report.prune_items.append(item)
            return report
