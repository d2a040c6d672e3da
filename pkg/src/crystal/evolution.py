"""Mutation records and the shared applier they replay through.

Every committed change to a graph is one audit record. Live mutation and log
replay both fold the same ``apply_audit_record`` function over records, so a
replayed graph is byte-identical to the live one by construction rather than
by careful bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import InvalidPayload, UnknownEdge, UnknownNode
from .graph import CanvasGraph, ChainEdge, ChainNode, EdgeStatus, EngineConfig, NodeKind


class EditKind(str, Enum):
    ADD_NODE = "AddNode"
    REMOVE_NODE = "RemoveNode"
    ADD_EDGE = "AddEdge"
    REMOVE_EDGE = "RemoveEdge"
    MODIFY_NODE = "ModifyNode"
    MODIFY_EDGE = "ModifyEdge"
    PROMOTE_EDGE = "PromoteEdge"
    RETIRE_EDGE = "RetireEdge"


#: Record kinds the engine writes beyond expert edit operations.
SYSTEM_OP_KINDS = frozenset(
    {
        "InitGraph",
        "ConfidenceUpdate",
        "WeightUpdate",
        "CompressSubpath",
        "AttachExploration",
        "ResolveReview",
    }
)


@dataclass(frozen=True)
class Actor:
    kind: str = "System"  # "Expert" | "Agent" | "System"
    actor_id: str | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "id": self.actor_id}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Actor":
        return cls(kind=raw.get("kind", "System"), actor_id=raw.get("id"))


SYSTEM_ACTOR = Actor()


@dataclass(frozen=True)
class EditOp:
    kind: EditKind
    payload: dict
    actor: Actor = SYSTEM_ACTOR

    def to_op_dict(self) -> dict:
        return {"op_kind": self.kind.value, "actor": self.actor.to_dict(), "payload": self.payload}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EditOp":
        try:
            kind = EditKind(raw.get("op_kind"))
        except ValueError:
            raise InvalidPayload(f"unknown edit kind {raw.get('op_kind')!r}") from None
        payload = raw.get("payload")
        if not isinstance(payload, Mapping):
            raise InvalidPayload("edit payload must be an object")
        return cls(kind=kind, payload=dict(payload), actor=Actor.from_dict(raw.get("actor", {})))


class Outcome(str, Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class Feedback:
    session_id: str
    visited_edge_ids: tuple[str, ...]
    outcome: Outcome
    expert_flag: bool = False


def feedback_to_delta(
    feedback: Feedback, graph: CanvasGraph | None = None
) -> dict[str, tuple[float, float]]:
    """Per-edge (delta_p, delta_w): Success reinforces both, Failure penalizes
    confidence only, Neutral is inert. An expert flag doubles delta_p."""
    if graph is not None:
        for edge_id in feedback.visited_edge_ids:
            if edge_id not in graph.edges:
                raise UnknownEdge(edge_id)
    if feedback.outcome is Outcome.SUCCESS:
        delta_p, delta_w = 1.0, 1.0
    elif feedback.outcome is Outcome.FAILURE:
        delta_p, delta_w = -1.0, 0.0
    else:
        delta_p, delta_w = 0.0, 0.0
    if feedback.expert_flag:
        delta_p *= 2.0
    return {edge_id: (delta_p, delta_w) for edge_id in feedback.visited_edge_ids}


def clamp_confidence(value: float) -> float:
    return max(0.0, min(1.0, value))


def next_confidence(current: float, delta_p: float, config: EngineConfig) -> float:
    return clamp_confidence(current + config.alpha * delta_p)


def next_weight(current: float, delta_w: float) -> float:
    return max(current + delta_w, 0.0)


@dataclass
class AuditRecord:
    seq: int
    timestamp: float
    graph_id: str
    pre_version: int
    op: dict
    result: dict = field(default_factory=lambda: {"status": "Applied"})

    @property
    def applied(self) -> bool:
        return self.result.get("status") == "Applied"

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": float(self.timestamp),
            "graph_id": self.graph_id,
            "pre_version": self.pre_version,
            "op": self.op,
            "result": self.result,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "AuditRecord":
        return cls(
            seq=int(raw["seq"]),
            timestamp=float(raw["timestamp"]),
            graph_id=raw["graph_id"],
            pre_version=int(raw["pre_version"]),
            op=dict(raw["op"]),
            result=dict(raw["result"]),
        )


def rejected(reason_kind: str, detail: str) -> dict:
    return {"status": "Rejected", "reason": reason_kind, "detail": detail}


def _require_node(graph: CanvasGraph, node_id: str) -> ChainNode:
    if node_id not in graph.nodes:
        raise UnknownNode(node_id)
    return graph.nodes[node_id]


def _require_edge(graph: CanvasGraph, edge_id: str) -> ChainEdge:
    if edge_id not in graph.edges:
        raise UnknownEdge(edge_id)
    return graph.edges[edge_id]


def _insert_node(graph: CanvasGraph, node: ChainNode) -> None:
    graph.nodes[node.id] = node
    graph._out.setdefault(node.id, set())
    graph._in.setdefault(node.id, set())
    if not graph.roots:
        graph.roots.add(node.id)


def _remove_node_cascade(graph: CanvasGraph, node_id: str) -> None:
    _require_node(graph, node_id)
    incident = sorted(graph._out.get(node_id, set()) | graph._in.get(node_id, set()))
    for edge_id in incident:
        graph._delete_edge_unchecked(edge_id)
    del graph.nodes[node_id]
    graph._out.pop(node_id, None)
    graph._in.pop(node_id, None)
    graph.roots.discard(node_id)


_NODE_CHANGE_FIELDS = {"label", "slot_key", "kind"}
_EDGE_CHANGE_FIELDS = {"confidence", "guard", "weight"}


def apply_audit_record(graph: CanvasGraph, record: AuditRecord) -> CanvasGraph:
    """Apply one Applied record. Mutates and returns the graph (InitGraph
    returns a replacement). Raises on payloads that no longer make sense;
    callers decide whether that means rejection (live) or corruption (replay).
    """
    op = record.op
    kind = op.get("op_kind")
    payload = op.get("payload", {})
    if kind == "InitGraph":
        return CanvasGraph.from_dict(payload["graph"])
    if kind == EditKind.ADD_NODE.value:
        node = ChainNode.from_dict(payload["node"])
        node.check()
        if node.id in graph.nodes:
            raise InvalidPayload(f"node id {node.id!r} already exists")
        _insert_node(graph, node)
    elif kind == EditKind.REMOVE_NODE.value:
        _remove_node_cascade(graph, payload["target_id"])
    elif kind == EditKind.ADD_EDGE.value:
        edge = ChainEdge.from_dict(payload["edge"])
        if edge.id in graph.edges:
            raise InvalidPayload(f"edge id {edge.id!r} already exists")
        _require_node(graph, edge.from_id)
        _require_node(graph, edge.to_id)
        edge.check()
        graph._insert_edge_unchecked(edge)
    elif kind == EditKind.REMOVE_EDGE.value:
        _require_edge(graph, payload["target_id"])
        graph._delete_edge_unchecked(payload["target_id"])
    elif kind == EditKind.MODIFY_NODE.value:
        node = _require_node(graph, payload["node_id"])
        changes = payload.get("changes", {})
        unknown = set(changes) - _NODE_CHANGE_FIELDS
        if unknown:
            raise InvalidPayload(f"unknown node changes: {sorted(unknown)}")
        if "label" in changes:
            node.label = changes["label"]
        if "slot_key" in changes:
            node.slot_key = changes["slot_key"]
        if "kind" in changes:
            node.kind = NodeKind(changes["kind"])
        node.check()
    elif kind == EditKind.MODIFY_EDGE.value:
        edge = _require_edge(graph, payload["edge_id"])
        changes = payload.get("changes", {})
        unknown = set(changes) - _EDGE_CHANGE_FIELDS
        if unknown:
            raise InvalidPayload(f"unknown edge changes: {sorted(unknown)}")
        if "confidence" in changes:
            edge.confidence = float(changes["confidence"])
        if "guard" in changes:
            edge.guard = changes["guard"]
        if "weight" in changes:
            edge.weight = float(changes["weight"])
        edge.check()
    elif kind == EditKind.PROMOTE_EDGE.value:
        edge = _require_edge(graph, payload["edge_id"])
        if edge.status is not EdgeStatus.PROVISIONAL:
            raise InvalidPayload(f"edge {edge.id!r} is {edge.status.value}, not Provisional")
        edge.status = EdgeStatus.ACTIVE
    elif kind == EditKind.RETIRE_EDGE.value:
        edge = _require_edge(graph, payload["edge_id"])
        edge.status = EdgeStatus.RETIRED
    elif kind == "ConfidenceUpdate":
        edge = _require_edge(graph, payload["edge_id"])
        edge.confidence = float(payload["new_confidence"])
    elif kind == "WeightUpdate":
        edge = _require_edge(graph, payload["edge_id"])
        edge.weight = float(payload["new_weight"])
    elif kind == "CompressSubpath":
        shortcut = ChainEdge.from_dict(payload["shortcut"])
        _require_node(graph, shortcut.from_id)
        _require_node(graph, shortcut.to_id)
        shortcut.check()
        if shortcut.id in graph.edges:
            raise InvalidPayload(f"edge id {shortcut.id!r} already exists")
        for edge_id in payload["retire"]:
            _require_edge(graph, edge_id)
        graph._insert_edge_unchecked(shortcut)
        for edge_id in payload["retire"]:
            graph.edges[edge_id].status = EdgeStatus.RETIRED
    elif kind == "AttachExploration":
        _require_node(graph, payload["anchor"])
        for node_raw in payload["nodes"]:
            node = ChainNode.from_dict(node_raw)
            node.check()
            if node.id in graph.nodes:
                raise InvalidPayload(f"node id {node.id!r} already exists")
        for edge_raw in payload["edges"]:
            if edge_raw["id"] in graph.edges:
                raise InvalidPayload(f"edge id {edge_raw['id']!r} already exists")
        for node_raw in payload["nodes"]:
            _insert_node(graph, ChainNode.from_dict(node_raw))
        for edge_raw in payload["edges"]:
            edge = ChainEdge.from_dict(edge_raw)
            edge.check()
            graph._insert_edge_unchecked(edge)
    elif kind == "ResolveReview":
        for edge_id in payload.get("retire_edges", []):
            _require_edge(graph, edge_id).status = EdgeStatus.RETIRED
        for edge_id in payload.get("promote_edges", []):
            edge = _require_edge(graph, edge_id)
            if edge.status is not EdgeStatus.PROVISIONAL:
                raise InvalidPayload(f"edge {edge.id!r} is {edge.status.value}, not Provisional")
            edge.status = EdgeStatus.ACTIVE
        if payload.get("promote_graph"):
            graph.promoted = True
    else:
        raise InvalidPayload(f"unknown audit op kind {kind!r}")
    graph.version = record.pre_version + 1
    return graph
