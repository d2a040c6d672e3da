"""Shared fixture helpers: quick graph construction for tests."""

from __future__ import annotations

from crystal.graph import CanvasGraph, ChainEdge, ChainNode, EdgeStatus, NodeKind, SupportSet


def make_node(node_id: str, kind: str = "Action", label: str | None = None, slot_key=None):
    if kind == "Decision" and slot_key is None:
        slot_key = f"slot_{node_id}"
    return ChainNode(
        id=node_id,
        kind=NodeKind(kind),
        label=label or f"step {node_id}",
        slot_key=slot_key,
        provenance={"test"},
    )


def make_graph(
    node_specs: list,
    edge_specs: list,
    roots: set[str] | None = None,
    graph_id: str = "gtest",
    promoted: bool = False,
    version: int = 1,
) -> CanvasGraph:
    """node_specs: node ids (str) or (id, kind) or (id, kind, label) tuples.
    edge_specs: (id, from, to) or (id, from, to, dict-of-extras) tuples."""
    graph = CanvasGraph(graph_id=graph_id, promoted=promoted)
    for spec in node_specs:
        if isinstance(spec, str):
            node = make_node(spec)
        elif len(spec) == 2:
            node = make_node(spec[0], spec[1])
        else:
            node = make_node(spec[0], spec[1], spec[2])
        graph.nodes[node.id] = node
        graph._out.setdefault(node.id, set())
        graph._in.setdefault(node.id, set())
    for spec in edge_specs:
        extras = spec[3] if len(spec) > 3 else {}
        edge = ChainEdge(
            id=spec[0],
            from_id=spec[1],
            to_id=spec[2],
            confidence=extras.get("confidence", 1.0),
            weight=extras.get("weight", 0.0),
            guard=extras.get("guard"),
            status=EdgeStatus(extras.get("status", "Active")),
            support=extras.get("support", SupportSet()),
            shortcut_provenance=extras.get("shortcut_provenance"),
        )
        graph._insert_edge_unchecked(edge)
    if roots is None:
        targets = {e.to_id for e in graph.edges.values()}
        roots = {n for n in graph.nodes if n not in targets} or set(list(graph.nodes)[:1])
    graph.roots = set(roots)
    graph.version = version
    return graph
