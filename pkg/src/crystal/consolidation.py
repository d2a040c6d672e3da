"""Experience consolidation: habitual-path detection, shortcut math, prune
scanning, and the review items that keep every structural change behind an
expert verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .graph import TRAVERSABLE, CanvasGraph, ChainEdge, EdgeStatus, EngineConfig

_ACTIVE_ONLY = frozenset({EdgeStatus.ACTIVE})


class ReviewKind(str, Enum):
    MERGE_VERIFICATION = "MergeVerification"
    EXPLORATION_PROPOSAL = "ExplorationProposal"
    PRUNE_CANDIDATE = "PruneCandidate"


class ReviewStatus(str, Enum):
    PENDING = "Pending"
    APPROVED = "Approved"
    REJECTED = "Rejected"


@dataclass
class ReviewItem:
    item_id: str
    kind: ReviewKind
    subject_ids: list[str] = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    status: ReviewStatus = ReviewStatus.PENDING
    cooldown_until_turn: int = 0

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "kind": self.kind.value,
            "subject_ids": list(self.subject_ids),
            "evidence": self.evidence,
            "status": self.status.value,
            "cooldown_until_turn": self.cooldown_until_turn,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ReviewItem":
        return cls(
            item_id=raw["item_id"],
            kind=ReviewKind(raw["kind"]),
            subject_ids=list(raw.get("subject_ids", [])),
            evidence=dict(raw.get("evidence", {})),
            status=ReviewStatus(raw.get("status", "Pending")),
            cooldown_until_turn=int(raw.get("cooldown_until_turn", 0)),
        )


def _active_degrees(graph: CanvasGraph) -> tuple[dict[str, int], dict[str, int]]:
    in_deg: dict[str, int] = {n: 0 for n in graph.nodes}
    out_deg: dict[str, int] = {n: 0 for n in graph.nodes}
    for edge in graph.edges.values():
        if edge.status is EdgeStatus.ACTIVE:
            out_deg[edge.from_id] += 1
            in_deg[edge.to_id] += 1
    return in_deg, out_deg


def detect_jump(graph: CanvasGraph, config: EngineConfig) -> list[list[str]]:
    """Maximal habitual chains: 2+ consecutive Active edges, each with weight
    strictly above tau_w, whose interior nodes carry no other Active edges.
    Returned chains are vertex-disjoint, in deterministic scan order."""
    in_deg, out_deg = _active_degrees(graph)

    def interior_simple(node_id: str) -> bool:
        return in_deg[node_id] == 1 and out_deg[node_id] == 1

    def continuation(node_id: str) -> ChainEdge | None:
        # only called on interior-simple nodes, so there is one out-edge
        edges = graph.out_edges(node_id, _ACTIVE_ONLY)
        if len(edges) == 1 and edges[0].weight > config.tau_w:
            return edges[0]
        return None

    def extendable_left(node_id: str) -> bool:
        if not interior_simple(node_id):
            return False
        incoming = graph.in_edges(node_id, _ACTIVE_ONLY)
        return bool(incoming) and incoming[0].weight > config.tau_w

    chains: list[list[str]] = []
    used: set[str] = set()
    for node_id in sorted(graph.nodes):
        for start in graph.out_edges(node_id, _ACTIVE_ONLY):
            if start.weight <= config.tau_w or extendable_left(node_id):
                continue
            chain = [node_id, start.to_id]
            while interior_simple(chain[-1]):
                nxt = continuation(chain[-1])
                if nxt is None or nxt.to_id in chain:
                    break
                chain.append(nxt.to_id)
            if len(chain) < 3 or any(n in used for n in chain):
                continue
            used.update(chain)
            chains.append(chain)
    return chains


def chain_edges(graph: CanvasGraph, chain: list[str]) -> list[ChainEdge]:
    """The Active edges along a node chain, one per consecutive pair."""
    edges = []
    for a, b in zip(chain, chain[1:]):
        found = [e for e in graph.out_edges(a, _ACTIVE_ONLY) if e.to_id == b]
        if not found:
            return []
        edges.append(found[0])
    return edges


def is_jump_candidate(graph: CanvasGraph, chain: list[str], config: EngineConfig) -> bool:
    """Re-verify a detected chain against the current graph state."""
    if len(chain) < 3 or len(set(chain)) != len(chain):
        return False
    if any(n not in graph.nodes for n in chain):
        return False
    edges = chain_edges(graph, chain)
    if len(edges) != len(chain) - 1:
        return False
    if any(e.weight <= config.tau_w for e in edges):
        return False
    in_deg, out_deg = _active_degrees(graph)
    return all(in_deg[n] == 1 and out_deg[n] == 1 for n in chain[1:-1])


def shortcut_payload(graph: CanvasGraph, chain: list[str]) -> dict:
    """Derived fields for the shortcut edge replacing a chain: bottleneck
    weight, series-product confidence, conjoined guards, interior provenance."""
    edges = chain_edges(graph, chain)
    weight = min(e.weight for e in edges)
    confidence = 1.0
    for e in edges:
        confidence *= e.confidence
    guards = [f"({e.guard})" for e in edges if e.guard]
    return {
        "from_id": chain[0],
        "to_id": chain[-1],
        "weight": weight,
        "confidence": confidence,
        "guard": " and ".join(guards) if guards else None,
        "shortcut_provenance": list(chain[1:-1]),
        "retire": [e.id for e in edges],
    }


@dataclass(frozen=True)
class PruneFinding:
    """One indirect two-hop path dominated by its direct edge."""

    i: str
    k: str
    j: str
    ratio: float
    edge_ik: str
    edge_kj: str
    edge_direct: str

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.i, self.k, self.j)


def _best_edge(edges: list[ChainEdge]) -> ChainEdge | None:
    # parallel edges: judge the pair by its strongest member, smallest id on ties
    if not edges:
        return None
    return max(edges, key=lambda e: (e.weight, [-ord(c) for c in e.id]))


def detect_prune(
    graph: CanvasGraph,
    config: EngineConfig,
    skip_triples: frozenset[tuple[str, str, str]] = frozenset(),
) -> list[PruneFinding]:
    """Scan every (i, k, j) with Active i->k, k->j and a traversable direct
    i->j of positive weight; flag the indirect pair when the weight ratio
    w_ik * w_kj / w_ij falls strictly below epsilon."""
    best_active: dict[tuple[str, str], ChainEdge] = {}
    best_direct: dict[tuple[str, str], ChainEdge] = {}
    grouped_active: dict[tuple[str, str], list[ChainEdge]] = {}
    grouped_direct: dict[tuple[str, str], list[ChainEdge]] = {}
    for edge in graph.edges.values():
        pair = (edge.from_id, edge.to_id)
        if edge.status is EdgeStatus.ACTIVE:
            grouped_active.setdefault(pair, []).append(edge)
        if edge.status in TRAVERSABLE:
            grouped_direct.setdefault(pair, []).append(edge)
    for pair, edges in grouped_active.items():
        best_active[pair] = _best_edge(edges)
    for pair, edges in grouped_direct.items():
        best_direct[pair] = _best_edge(edges)

    findings: list[PruneFinding] = []
    for k in sorted(graph.nodes):
        preds = sorted({p for (p, t) in best_active if t == k})
        succs = sorted({t for (p, t) in best_active if p == k})
        for i in preds:
            for j in succs:
                if (i, k, j) in skip_triples:
                    continue
                direct = best_direct.get((i, j))
                if direct is None or direct.weight <= 0.0:
                    continue
                e_ik = best_active[(i, k)]
                e_kj = best_active[(k, j)]
                ratio = (e_ik.weight * e_kj.weight) / direct.weight
                if ratio < config.epsilon:
                    findings.append(
                        PruneFinding(
                            i=i,
                            k=k,
                            j=j,
                            ratio=ratio,
                            edge_ik=e_ik.id,
                            edge_kj=e_kj.id,
                            edge_direct=direct.id,
                        )
                    )
    findings.sort(key=lambda f: f.triple)
    return findings


def prune_item_evidence(finding: PruneFinding) -> dict:
    return {
        "triple": list(finding.triple),
        "ratio": finding.ratio,
        "direct_edge": finding.edge_direct,
    }
