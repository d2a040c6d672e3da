import type { GraphEdge, GraphNode, GraphSnapshot } from "../src/types";

type EdgeSpec = Partial<GraphEdge> & { id: string; from: string; to: string };

export function snapshotOf(
  nodeSpecs: Array<Partial<GraphNode> & { id: string }>,
  edgeSpecs: EdgeSpec[],
  version = 1,
): GraphSnapshot {
  const nodes: Record<string, GraphNode> = {};
  for (const spec of nodeSpecs) {
    nodes[spec.id] = {
      id: spec.id,
      kind: spec.kind ?? "Action",
      label: spec.label ?? `do ${spec.id}`,
      slot_key: spec.slot_key ?? null,
    };
  }
  const edges: Record<string, GraphEdge> = {};
  for (const spec of edgeSpecs) {
    edges[spec.id] = {
      id: spec.id,
      from: spec.from,
      to: spec.to,
      confidence: spec.confidence ?? 0.5,
      weight: spec.weight ?? 0,
      status: spec.status ?? "Active",
      guard: spec.guard ?? null,
      shortcut_provenance: spec.shortcut_provenance ?? null,
    };
  }
  const targets = new Set(edgeSpecs.map((e) => e.to));
  const roots = nodeSpecs.map((n) => n.id).filter((id) => !targets.has(id));
  return {
    checksum: "x".repeat(64),
    format_version: 1,
    config: { alpha: 0.1 },
    graph: {
      graph_id: "gfix",
      version,
      promoted: true,
      nodes,
      edges,
      roots: roots.length > 0 ? roots : [nodeSpecs[0]!.id],
    },
  };
}
