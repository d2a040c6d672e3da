"""Consensus merging: align chain nodes into units, aggregate per-edge
confidence, and repair contradictions until the result is a clean graph.

Confidence aggregation runs on exact rationals so the consensus value is
independent of input order and of how many identical copies of a chain
participate; the float conversion happens once per edge at the end.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .canonical import checksum_of
from .errors import DuplicateId, EmptyInput, EmptyLabel, PartitionMismatch, ZeroEmbedding
from .extraction import CandidateChain
from .graph import (
    CanvasGraph,
    ChainEdge,
    ChainNode,
    EdgeStatus,
    EngineConfig,
    NodeKind,
    SupportEntry,
    SupportSet,
)


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)


def _token_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def embed(label: str, config: EngineConfig) -> Embedding:
    """Hashed bag-of-tokens embedding: lowercase, whitespace-split, count into
    embedding_dim buckets, L2-normalize. Pure for a fixed configuration."""
    tokens = label.lower().split()
    if not tokens:
        raise EmptyLabel(f"cannot embed blank label {label!r}")
    counts = [0.0] * config.embedding_dim
    for token in tokens:
        counts[_token_bucket(token, config.embedding_dim)] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return Embedding(values=tuple(c / norm for c in counts))


def similarity(a: Embedding, b: Embedding) -> float:
    if a.is_zero or b.is_zero:
        raise ZeroEmbedding("similarity is undefined for the zero embedding")
    if a.values == b.values:
        return 1.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot))


@dataclass
class AlignmentPartition:
    """Node-to-unit assignment plus each unit's representative."""

    unit_of: dict[tuple[str, str], str] = field(default_factory=dict)
    representative_label: dict[str, str] = field(default_factory=dict)
    unit_kind: dict[str, str] = field(default_factory=dict)

    def units(self) -> list[str]:
        return sorted(self.representative_label)


def align_nodes(chains: list[CandidateChain], config: EngineConfig) -> AlignmentPartition:
    """Greedy agglomerative clustering in sorted (chain_id, node_id) order.

    A node joins the smallest-id existing unit of the same kind whose
    representative reaches tau_sim similarity, else founds a new unit whose
    representative is its own label.
    """
    if not chains:
        raise EmptyInput("align_nodes requires at least one chain")
    by_id = {c.chain_id: c for c in chains}
    partition = AlignmentPartition()
    reps: list[tuple[str, Embedding, str]] = []  # (unit_id, rep embedding, kind)
    for chain_id in sorted(by_id):
        chain = by_id[chain_id]
        for step in sorted(chain.steps, key=lambda s: s.id):
            kind = chain.kind_of(step.id)
            vector = embed(step.label, config)
            best_unit = None
            best_sim = -math.inf
            for unit_id, rep, rep_kind in reps:
                if rep_kind != kind:
                    continue
                sim = similarity(vector, rep)
                if sim >= config.tau_sim and sim > best_sim:
                    best_sim = sim
                    best_unit = unit_id
            if best_unit is None:
                best_unit = f"u{len(reps):04d}"
                reps.append((best_unit, vector, kind))
                partition.representative_label[best_unit] = step.label
                partition.unit_kind[best_unit] = kind
            partition.unit_of[(chain_id, step.id)] = best_unit
    return partition


@dataclass
class RemovedEdge:
    edge_id: str
    from_id: str
    to_id: str
    confidence: float
    reason: str  # "cycle" or "low-confidence-duplicate"

    def to_dict(self) -> dict:
        return {
            "edge_id": self.edge_id,
            "from": self.from_id,
            "to": self.to_id,
            "confidence": float(self.confidence),
            "reason": self.reason,
        }


@dataclass
class MergeReport:
    merged_graph_id: str = ""
    removed_edges: list[RemovedEdge] = field(default_factory=list)
    review_items_created: list[dict] = field(default_factory=list)
    consensus: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "merged_graph_id": self.merged_graph_id,
            "removed_edges": [r.to_dict() for r in self.removed_edges],
            "review_items_created": self.review_items_created,
            "consensus": {k: float(v) for k, v in self.consensus.items()},
        }


def aggregate_paths(partition: AlignmentPartition, chains: list[CandidateChain]) -> CanvasGraph:
    """Draft graph with one node per unit and one edge per connected unit
    pair; consensus confidence is the mean over every supporting source edge.
    Drafts may still contain cycles."""
    draft = CanvasGraph()
    used_units: set[str] = set()
    # (unit, unit) -> list of (chain_id, source child step id, P_k)
    contributions: dict[tuple[str, str], list[tuple[str, str, float]]] = {}
    provenance: dict[str, set[str]] = {}
    for chain in sorted(chains, key=lambda c: c.chain_id):
        for step in chain.steps:
            key = (chain.chain_id, step.id)
            if key not in partition.unit_of:
                raise PartitionMismatch(f"node {key} is not covered by the partition")
            unit = partition.unit_of[key]
            used_units.add(unit)
            provenance.setdefault(unit, set()).add(chain.source_case_id or chain.chain_id)
        for parent_id, child_id, p_k in chain.edges():
            u = partition.unit_of[(chain.chain_id, parent_id)]
            v = partition.unit_of[(chain.chain_id, child_id)]
            if u == v:
                continue  # adjacent steps collapsed into one unit
            contributions.setdefault((u, v), []).append((chain.chain_id, child_id, p_k))
    for unit in sorted(used_units):
        node = ChainNode(
            id=unit,
            kind=NodeKind(partition.unit_kind[unit]),
            label=partition.representative_label[unit],
            provenance=provenance.get(unit, set()),
        )
        draft.nodes[unit] = node
        draft._out.setdefault(unit, set())
        draft._in.setdefault(unit, set())
    for i, (u, v) in enumerate(sorted(contributions)):
        entries = sorted(contributions[(u, v)])
        mean = Fraction(0)
        for _, _, p_k in entries:
            mean += Fraction(p_k)
        mean /= len(entries)
        support = SupportSet()
        by_chain: dict[str, list[tuple[str, float]]] = {}
        for chain_id, child_id, p_k in entries:
            by_chain.setdefault(chain_id, []).append((child_id, p_k))
        for chain_id in sorted(by_chain):
            chain_mean = sum(Fraction(p) for _, p in by_chain[chain_id]) / len(by_chain[chain_id])
            support.entries.append(
                SupportEntry(
                    chain_id=chain_id,
                    source_edge_path=tuple(child for child, _ in by_chain[chain_id]),
                    source_confidence=float(chain_mean),
                )
            )
        edge = ChainEdge(
            id=f"e{i:04d}",
            from_id=u,
            to_id=v,
            confidence=float(mean),
            status=EdgeStatus.ACTIVE,
            support=support,
        )
        draft._insert_edge_unchecked(edge)
    draft.roots = {n for n in draft.nodes if not draft._in.get(n)}
    return draft


def _recompute_roots(graph: CanvasGraph) -> None:
    graph.roots = {
        n
        for n in graph.nodes
        if not any(graph.edges[e].status in (EdgeStatus.ACTIVE, EdgeStatus.SHORTCUT)
                   for e in graph._in.get(n, ()))
    }


def consistency_check(graph: CanvasGraph) -> tuple[CanvasGraph, MergeReport]:
    """Repair a draft in place: collapse duplicate parallel edges onto the
    highest-confidence one, then break every Active cycle by dropping its
    minimum-confidence edge (ties remove the lexicographically greatest id)."""
    report = MergeReport()
    by_pair: dict[tuple[str, str], list[ChainEdge]] = {}
    for edge in sorted(graph.edges.values(), key=lambda e: e.id):
        if edge.status is EdgeStatus.ACTIVE:
            by_pair.setdefault((edge.from_id, edge.to_id), []).append(edge)
    for pair_edges in by_pair.values():
        if len(pair_edges) < 2:
            continue
        keep = max(pair_edges, key=lambda e: (e.confidence, [-ord(c) for c in e.id]))
        kept_chains = {entry.chain_id for entry in keep.support.entries}
        for edge in pair_edges:
            if edge is keep:
                continue
            for entry in edge.support.entries:
                if entry.chain_id not in kept_chains:
                    keep.support.entries.append(entry)
                    kept_chains.add(entry.chain_id)
            graph._delete_edge_unchecked(edge.id)
            report.removed_edges.append(
                RemovedEdge(edge.id, edge.from_id, edge.to_id, edge.confidence,
                            "low-confidence-duplicate")
            )
        keep.support.entries.sort(key=lambda entry: entry.chain_id)
    while True:
        cycles = graph.find_cycles(frozenset({EdgeStatus.ACTIVE}))
        if not cycles:
            break
        cycle = cycles[0]
        candidates: list[ChainEdge] = []
        for i, node in enumerate(cycle):
            succ = cycle[(i + 1) % len(cycle)]
            for eid in sorted(graph._out.get(node, ())):
                edge = graph.edges[eid]
                if edge.to_id == succ and edge.status is EdgeStatus.ACTIVE:
                    candidates.append(edge)
        victim = min(candidates, key=lambda e: (e.confidence, [-ord(c) for c in e.id]))
        graph._delete_edge_unchecked(victim.id)
        report.removed_edges.append(
            RemovedEdge(victim.id, victim.from_id, victim.to_id, victim.confidence, "cycle")
        )
    _recompute_roots(graph)
    return graph, report


def merge(chains: list[CandidateChain], config: EngineConfig) -> tuple[CanvasGraph, MergeReport]:
    """Full pipeline: align, aggregate, repair, then stage for expert review.

    The output graph is structurally valid but not yet promoted; a
    MergeVerification review item gates its use by live sessions.
    """
    if not chains:
        raise EmptyInput("merge requires at least one chain")
    seen: set[str] = set()
    for chain in chains:
        chain.check()
        if chain.chain_id in seen:
            raise DuplicateId(chain.chain_id)
        seen.add(chain.chain_id)
    partition = align_nodes(chains, config)
    draft = aggregate_paths(partition, chains)
    graph, report = consistency_check(draft)
    digest = checksum_of(
        {
            "chains": sorted((c.to_dict() for c in chains), key=lambda d: d["chain_id"]),
            "config": config.to_dict(),
        }
    )
    graph.graph_id = f"g{digest[:12]}"
    graph.version = 1
    graph.promoted = False
    report.merged_graph_id = graph.graph_id
    report.consensus = {eid: graph.edges[eid].confidence for eid in sorted(graph.edges)}
    report.review_items_created.append(
        {"kind": "MergeVerification", "subject_ids": [graph.graph_id]}
    )
    validation = graph.validate()
    assert validation.is_empty, f"merge produced an invalid graph: {validation.describe()}"
    return graph, report
