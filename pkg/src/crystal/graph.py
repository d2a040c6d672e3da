"""Canvas graph: the rooted acyclic reasoning structure everything else edits.

Nodes are reasoning steps or decision points, edges carry a consensus
confidence and an experience weight. Acyclicity is enforced only over the
traversable statuses (Active, Shortcut); Provisional edges may stage
arbitrary structure until promotion re-checks them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import (
    ConfidenceOutOfRange,
    CycleRejected,
    DuplicateId,
    InvalidConfig,
    InvalidNode,
    NotFound,
    UnknownNode,
)


class NodeKind(str, Enum):
    DECISION = "Decision"
    ACTION = "Action"
    OBSERVATION = "Observation"
    QUESTION = "Question"
    TERMINAL = "Terminal"


class EdgeStatus(str, Enum):
    ACTIVE = "Active"
    PROVISIONAL = "Provisional"
    SHORTCUT = "Shortcut"
    PRUNE_CANDIDATE = "PruneCandidate"
    RETIRED = "Retired"


#: Statuses that participate in traversal, reachability and acyclicity.
TRAVERSABLE = frozenset({EdgeStatus.ACTIVE, EdgeStatus.SHORTCUT})


@dataclass(frozen=True)
class EngineConfig:
    """Immutable tuning knobs shared by every stage of the engine.

    alpha: learning rate applied to confidence deltas.
    tau_w: edge weight above which subpath compression triggers.
    epsilon: strict upper bound for the indirect/direct weight ratio that
        flags a prune candidate.
    tau_sim: cosine similarity threshold for node alignment.
    initial_confidence_p0: confidence assigned to explored (proposed) edges.
    prune_cooldown_turns: number of prune scans a rejected triple sits out.
    """

    alpha: float = 0.1
    tau_w: float = 10.0
    epsilon: float = 0.05
    tau_sim: float = 0.85
    embedding_dim: int = 64
    initial_confidence_p0: float = 0.5
    prune_cooldown_turns: int = 3

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidConfig(f"alpha must be in (0, 1], got {self.alpha}")
        if not (self.tau_w > 0.0):
            raise InvalidConfig(f"tau_w must be > 0, got {self.tau_w}")
        if not (0.0 < self.epsilon < 1.0):
            raise InvalidConfig(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not (0.0 < self.tau_sim <= 1.0):
            raise InvalidConfig(f"tau_sim must be in (0, 1], got {self.tau_sim}")
        if not (isinstance(self.embedding_dim, int) and self.embedding_dim > 0):
            raise InvalidConfig(f"embedding_dim must be a positive integer, got {self.embedding_dim}")
        if not (0.0 <= self.initial_confidence_p0 <= 1.0):
            raise InvalidConfig(f"initial_confidence_p0 must be in [0, 1], got {self.initial_confidence_p0}")
        if not (isinstance(self.prune_cooldown_turns, int) and self.prune_cooldown_turns >= 0):
            raise InvalidConfig(f"prune_cooldown_turns must be a non-negative integer, got {self.prune_cooldown_turns}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tau_w": self.tau_w,
            "epsilon": self.epsilon,
            "tau_sim": self.tau_sim,
            "embedding_dim": self.embedding_dim,
            "initial_confidence_p0": self.initial_confidence_p0,
            "prune_cooldown_turns": self.prune_cooldown_turns,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EngineConfig":
        fields = {k: raw[k] for k in cls.__dataclass_fields__ if k in raw}
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown config fields: {sorted(unknown)}")
        return cls(**fields)


@dataclass
class SupportEntry:
    """One merged chain's contribution to an edge."""

    chain_id: str
    source_edge_path: tuple[str, ...]
    source_confidence: float

    def to_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "source_edge_path": list(self.source_edge_path),
            "source_confidence": float(self.source_confidence),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SupportEntry":
        return cls(
            chain_id=raw["chain_id"],
            source_edge_path=tuple(raw["source_edge_path"]),
            source_confidence=float(raw["source_confidence"]),
        )


@dataclass
class SupportSet:
    entries: list[SupportEntry] = field(default_factory=list)

    def chain_ids(self) -> list[str]:
        return [e.chain_id for e in self.entries]

    def to_dict(self) -> dict:
        ordered = sorted(self.entries, key=lambda e: e.chain_id)
        return {"entries": [e.to_dict() for e in ordered]}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SupportSet":
        return cls(entries=[SupportEntry.from_dict(e) for e in raw.get("entries", [])])


@dataclass
class ChainNode:
    id: str
    kind: NodeKind
    label: str
    slot_key: str | None = None
    provenance: set[str] = field(default_factory=set)

    def check(self) -> None:
        if not self.label or not self.label.strip():
            raise InvalidNode(f"node {self.id!r} has an empty label")
        if self.kind is NodeKind.DECISION and not self.slot_key:
            raise InvalidNode(f"Decision node {self.id!r} requires a slot_key")
        if self.kind is not NodeKind.DECISION and self.slot_key:
            raise InvalidNode(f"non-Decision node {self.id!r} must not carry a slot_key")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "label": self.label,
            "slot_key": self.slot_key,
            "provenance": sorted(self.provenance),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ChainNode":
        return cls(
            id=raw["id"],
            kind=NodeKind(raw["kind"]),
            label=raw["label"],
            slot_key=raw.get("slot_key"),
            provenance=set(raw.get("provenance", [])),
        )


@dataclass
class ChainEdge:
    id: str
    from_id: str
    to_id: str
    confidence: float
    weight: float = 0.0
    guard: str | None = None
    status: EdgeStatus = EdgeStatus.ACTIVE
    support: SupportSet = field(default_factory=SupportSet)
    shortcut_provenance: list[str] | None = None

    @property
    def traversable(self) -> bool:
        return self.status in TRAVERSABLE

    def check(self) -> None:
        if not (0.0 <= self.confidence <= 1.0) or math.isnan(self.confidence):
            raise ConfidenceOutOfRange(self.confidence)
        if self.weight < 0.0 or math.isnan(self.weight):
            raise InvalidNode(f"edge {self.id!r} has negative weight {self.weight}")
        if self.from_id == self.to_id:
            raise CycleRejected([self.from_id])
        has_prov = bool(self.shortcut_provenance)
        if (self.status is EdgeStatus.SHORTCUT) != has_prov:
            raise InvalidNode(
                f"edge {self.id!r}: shortcut_provenance present iff status is Shortcut"
            )
        seen = set()
        for entry in self.support.entries:
            if entry.chain_id in seen:
                raise InvalidNode(f"edge {self.id!r}: duplicate support chain {entry.chain_id!r}")
            seen.add(entry.chain_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "from": self.from_id,
            "to": self.to_id,
            "confidence": float(self.confidence),
            "weight": float(self.weight),
            "guard": self.guard,
            "status": self.status.value,
            "support": self.support.to_dict(),
            "shortcut_provenance": list(self.shortcut_provenance) if self.shortcut_provenance else None,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ChainEdge":
        prov = raw.get("shortcut_provenance")
        return cls(
            id=raw["id"],
            from_id=raw["from"],
            to_id=raw["to"],
            confidence=float(raw["confidence"]),
            weight=float(raw.get("weight", 0.0)),
            guard=raw.get("guard"),
            status=EdgeStatus(raw["status"]),
            support=SupportSet.from_dict(raw.get("support", {})),
            shortcut_provenance=list(prov) if prov else None,
        )


@dataclass
class RemovalReport:
    nodes: list[str] = field(default_factory=list)
    edges: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "edges": list(self.edges)}


@dataclass
class ValidationReport:
    """Read-only findings; an empty report means every graph invariant holds."""

    cycles: list[list[str]] = field(default_factory=list)
    dangling: list[str] = field(default_factory=list)
    range_violations: list[str] = field(default_factory=list)
    unreachable: list[str] = field(default_factory=list)
    structural: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not (
            self.cycles
            or self.dangling
            or self.range_violations
            or self.unreachable
            or self.structural
        )

    def describe(self) -> list[str]:
        out: list[str] = []
        out.extend(f"cycle through {c}" for c in self.cycles)
        out.extend(self.dangling)
        out.extend(self.range_violations)
        out.extend(f"unreachable node {n}" for n in self.unreachable)
        out.extend(self.structural)
        return out

    def to_dict(self) -> dict:
        return {
            "cycles": [list(c) for c in self.cycles],
            "dangling": list(self.dangling),
            "range_violations": list(self.range_violations),
            "unreachable": list(self.unreachable),
            "structural": list(self.structural),
        }


class CanvasGraph:
    """Mutable container for the reasoning graph plus its integrity operations.

    Mutations bump ``version`` by exactly one. Callers needing serialized
    writes wrap a graph in an engine; the container itself is single-threaded.
    """

    def __init__(self, graph_id: str = "", promoted: bool = False):
        self.graph_id = graph_id
        self.nodes: dict[str, ChainNode] = {}
        self.edges: dict[str, ChainEdge] = {}
        self.roots: set[str] = set()
        self.version: int = 0
        self.promoted: bool = promoted
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}

    # -- accessors ------------------------------------------------------

    def node(self, node_id: str) -> ChainNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def edge(self, edge_id: str) -> ChainEdge:
        try:
            return self.edges[edge_id]
        except KeyError:
            from .errors import UnknownEdge

            raise UnknownEdge(edge_id) from None

    def out_edges(self, node_id: str, statuses: frozenset = TRAVERSABLE) -> list[ChainEdge]:
        """Outgoing edges in ascending edge-id order (the deterministic order)."""
        ids = sorted(self._out.get(node_id, ()))
        return [self.edges[eid] for eid in ids if self.edges[eid].status in statuses]

    def in_edges(self, node_id: str, statuses: frozenset = TRAVERSABLE) -> list[ChainEdge]:
        ids = sorted(self._in.get(node_id, ()))
        return [self.edges[eid] for eid in ids if self.edges[eid].status in statuses]

    def allocate_node_id(self) -> str:
        i = len(self.nodes)
        while f"n{i:04d}" in self.nodes:
            i += 1
        return f"n{i:04d}"

    def allocate_edge_id(self) -> str:
        i = len(self.edges)
        while f"e{i:04d}" in self.edges:
            i += 1
        return f"e{i:04d}"

    # -- mutations ------------------------------------------------------

    def add_node(self, node: ChainNode) -> str:
        if node.id in self.nodes:
            raise DuplicateId(node.id)
        node.check()
        self.nodes[node.id] = node
        self._out.setdefault(node.id, set())
        self._in.setdefault(node.id, set())
        # A graph must not hold nodes without any root; the first node
        # anchors the root set, later isolated nodes stay non-root.
        if not self.roots:
            self.roots.add(node.id)
        self.version += 1
        return node.id

    def add_edge(
        self,
        from_id: str,
        to_id: str,
        confidence: float,
        status: EdgeStatus = EdgeStatus.ACTIVE,
        guard: str | None = None,
        edge_id: str | None = None,
        support: SupportSet | None = None,
        shortcut_provenance: list[str] | None = None,
    ) -> str:
        if from_id not in self.nodes:
            raise UnknownNode(from_id)
        if to_id not in self.nodes:
            raise UnknownNode(to_id)
        if not (0.0 <= confidence <= 1.0) or math.isnan(confidence):
            raise ConfidenceOutOfRange(confidence)
        if from_id == to_id:
            raise CycleRejected([from_id])
        if edge_id is None:
            edge_id = self.allocate_edge_id()
        if edge_id in self.edges:
            raise DuplicateId(edge_id)
        if status in TRAVERSABLE:
            back = self.find_path(to_id, from_id, TRAVERSABLE)
            if back is not None:
                raise CycleRejected(back)
        edge = ChainEdge(
            id=edge_id,
            from_id=from_id,
            to_id=to_id,
            confidence=confidence,
            guard=guard,
            status=status,
            support=support or SupportSet(),
            shortcut_provenance=shortcut_provenance,
        )
        edge.check()
        self._insert_edge_unchecked(edge)
        self.version += 1
        return edge_id

    def _insert_edge_unchecked(self, edge: ChainEdge) -> None:
        """Raw insertion used by merge drafts and deserialization; no checks,
        no version bump."""
        self.edges[edge.id] = edge
        self._out.setdefault(edge.from_id, set()).add(edge.id)
        self._in.setdefault(edge.to_id, set()).add(edge.id)

    def _delete_edge_unchecked(self, edge_id: str) -> None:
        edge = self.edges.pop(edge_id)
        self._out.get(edge.from_id, set()).discard(edge_id)
        self._in.get(edge.to_id, set()).discard(edge_id)

    def remove_element(self, target_id: str) -> RemovalReport:
        """Delete one edge, or one node plus all incident edges."""
        report = RemovalReport()
        if target_id in self.edges:
            self._delete_edge_unchecked(target_id)
            report.edges.append(target_id)
        elif target_id in self.nodes:
            incident = sorted(self._out.get(target_id, set()) | self._in.get(target_id, set()))
            for eid in incident:
                self._delete_edge_unchecked(eid)
                report.edges.append(eid)
            del self.nodes[target_id]
            self._out.pop(target_id, None)
            self._in.pop(target_id, None)
            self.roots.discard(target_id)
            report.nodes.append(target_id)
        else:
            raise NotFound(target_id)
        self.version += 1
        return report

    # -- reachability and cycles -----------------------------------------

    def find_path(
        self, src: str, dst: str, statuses: frozenset = TRAVERSABLE
    ) -> list[str] | None:
        """Deterministic DFS path src -> dst over the given statuses, or None."""
        if src == dst:
            return [src]
        stack: list[tuple[str, list[str]]] = [(src, [src])]
        seen = {src}
        while stack:
            node, path = stack.pop()
            # reversed keeps expansion order ascending by edge id under pop()
            for edge in reversed(self.out_edges(node, statuses)):
                nxt = edge.to_id
                if nxt == dst:
                    return path + [nxt]
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, path + [nxt]))
        return None

    def reachable_from_roots(self, statuses: frozenset = TRAVERSABLE) -> set[str]:
        seen: set[str] = set()
        stack = sorted(r for r in self.roots if r in self.nodes)
        seen.update(stack)
        while stack:
            node = stack.pop()
            for edge in self.out_edges(node, statuses):
                if edge.to_id not in seen:
                    seen.add(edge.to_id)
                    stack.append(edge.to_id)
        return seen

    def find_cycles(self, statuses: frozenset = TRAVERSABLE) -> list[list[str]]:
        """All distinct cycles discovered by one DFS sweep, normalized to start
        at their smallest node id. One cycle per back edge is reported."""
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {n: WHITE for n in self.nodes}
        cycles: list[list[str]] = []
        seen_sets: set[frozenset] = set()

        def visit(start: str) -> None:
            stack: list[tuple[str, Iterable[ChainEdge]]] = [
                (start, iter(self.out_edges(start, statuses)))
            ]
            trail = [start]
            color[start] = GRAY
            while stack:
                node, edges_iter = stack[-1]
                advanced = False
                for edge in edges_iter:
                    nxt = edge.to_id
                    if nxt not in color:
                        continue
                    if color[nxt] == GRAY:
                        idx = trail.index(nxt)
                        cycle = trail[idx:]
                        key = frozenset(cycle)
                        if key not in seen_sets:
                            seen_sets.add(key)
                            pivot = cycle.index(min(cycle))
                            cycles.append(cycle[pivot:] + cycle[:pivot])
                    elif color[nxt] == WHITE:
                        color[nxt] = GRAY
                        trail.append(nxt)
                        stack.append((nxt, iter(self.out_edges(nxt, statuses))))
                        advanced = True
                        break
                if not advanced:
                    color[node] = BLACK
                    trail.pop()
                    stack.pop()

        for node_id in sorted(self.nodes):
            if color[node_id] == WHITE:
                visit(node_id)
        return cycles

    # -- reporting --------------------------------------------------------

    def validate(self) -> ValidationReport:
        report = ValidationReport()
        for node in self.nodes.values():
            try:
                node.check()
            except (InvalidNode, CycleRejected) as err:
                report.structural.append(str(err))
        for edge in sorted(self.edges.values(), key=lambda e: e.id):
            if edge.from_id not in self.nodes:
                report.dangling.append(f"edge {edge.id} references missing node {edge.from_id}")
            if edge.to_id not in self.nodes:
                report.dangling.append(f"edge {edge.id} references missing node {edge.to_id}")
            if math.isnan(edge.confidence) or not (0.0 <= edge.confidence <= 1.0):
                report.range_violations.append(
                    f"edge {edge.id} confidence {edge.confidence} outside [0, 1]"
                )
            if math.isnan(edge.weight) or edge.weight < 0.0:
                report.range_violations.append(f"edge {edge.id} weight {edge.weight} below 0")
            if edge.from_id == edge.to_id:
                report.structural.append(f"edge {edge.id} is a self-loop on {edge.from_id}")
            has_prov = bool(edge.shortcut_provenance)
            if (edge.status is EdgeStatus.SHORTCUT) != has_prov:
                report.structural.append(
                    f"edge {edge.id}: shortcut_provenance present iff status Shortcut"
                )
            seen_chains = set()
            for entry in edge.support.entries:
                if entry.chain_id in seen_chains:
                    report.structural.append(
                        f"edge {edge.id}: duplicate support chain {entry.chain_id}"
                    )
                seen_chains.add(entry.chain_id)
        for root in sorted(self.roots):
            if root not in self.nodes:
                report.dangling.append(f"root {root} does not exist")
        if self.nodes and not self.roots:
            report.structural.append("graph has nodes but no roots")
        report.cycles = self.find_cycles(TRAVERSABLE)
        reachable = self.reachable_from_roots(TRAVERSABLE)
        for node_id in sorted(self.nodes):
            if node_id in self.roots or node_id in reachable:
                continue
            incident = self._out.get(node_id, set()) | self._in.get(node_id, set())
            statuses = {self.edges[e].status for e in incident if e in self.edges}
            if statuses & TRAVERSABLE:
                report.unreachable.append(node_id)
        return report

    def enumerate_paths(self, from_id: str, to_id: str, max_len: int) -> list[list[str]]:
        """All simple paths over traversable edges, at most ``max_len`` edges
        long, ordered lexicographically by their edge-id sequence."""
        if from_id not in self.nodes:
            raise UnknownNode(from_id)
        if to_id not in self.nodes:
            raise UnknownNode(to_id)
        results: list[list[str]] = []
        emitted: set[tuple[str, ...]] = set()

        def walk(node: str, node_path: list[str], depth: int) -> None:
            if node == to_id:
                key = tuple(node_path)
                if key not in emitted:
                    emitted.add(key)
                    results.append(list(node_path))
                return
            if depth == max_len:
                return
            for edge in self.out_edges(node, TRAVERSABLE):
                if edge.to_id in node_path:
                    continue
                node_path.append(edge.to_id)
                walk(edge.to_id, node_path, depth + 1)
                node_path.pop()

        walk(from_id, [from_id], 0)
        return results

    # -- copy / serialization ---------------------------------------------

    def clone(self) -> "CanvasGraph":
        return CanvasGraph.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "nodes": {nid: n.to_dict() for nid, n in self.nodes.items()},
            "edges": {eid: e.to_dict() for eid, e in self.edges.items()},
            "roots": sorted(self.roots),
            "version": self.version,
            "promoted": self.promoted,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "CanvasGraph":
        graph = cls(graph_id=raw.get("graph_id", ""), promoted=bool(raw.get("promoted", False)))
        for nid, node_raw in raw.get("nodes", {}).items():
            node = ChainNode.from_dict(node_raw)
            graph.nodes[nid] = node
            graph._out.setdefault(nid, set())
            graph._in.setdefault(nid, set())
        for _eid, edge_raw in raw.get("edges", {}).items():
            graph._insert_edge_unchecked(ChainEdge.from_dict(edge_raw))
        graph.roots = set(raw.get("roots", []))
        graph.version = int(raw.get("version", 0))
        return graph
