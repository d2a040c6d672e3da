import { layoutGraph, type Point } from "./layout";
import type { GraphSnapshot } from "./types";

// The scene model is the rendered element set: the canvas painter draws
// exactly these sprites and nothing else, so comparing the scene against a
// server snapshot is comparing what the expert sees against the truth.

export type EdgeStyleKey =
  | "active"
  | "provisional"
  | "shortcut"
  | "retired"
  | "prune-candidate";

export interface NodeSprite {
  id: string;
  label: string;
  kind: string;
  at: Point;
  onVisitedPath: boolean;
}

export interface EdgeSprite {
  id: string;
  from: string;
  to: string;
  styleKey: EdgeStyleKey;
  badge: string;
  guard: string | null;
  tooltip: string | null;
  onVisitedPath: boolean;
}

export interface SceneModel {
  graphId: string;
  version: number;
  promoted: boolean;
  nodes: NodeSprite[];
  edges: EdgeSprite[];
}

export interface SceneOptions {
  seed?: number;
  visitedEdgeIds?: readonly string[];
  pruneEdgeIds?: readonly string[];
}

const STATUS_STYLE: Record<string, EdgeStyleKey> = {
  Active: "active",
  Provisional: "provisional",
  Shortcut: "shortcut",
  Retired: "retired",
};

// stroke recipes per style key, used by the painter; having them here keeps
// "visually distinct" a checkable property instead of a CSS accident
export const EDGE_STROKES: Record<EdgeStyleKey, { color: string; dash: number[]; width: number }> = {
  active: { color: "#1d4ed8", dash: [], width: 2 },
  provisional: { color: "#9333ea", dash: [6, 4], width: 1.5 },
  shortcut: { color: "#047857", dash: [], width: 3.5 },
  retired: { color: "#9ca3af", dash: [2, 4], width: 1 },
  "prune-candidate": { color: "#b45309", dash: [10, 3], width: 2.5 },
};

export function edgeBadge(confidence: number, weight: number): string {
  return `P=${confidence.toFixed(2)} w=${weight.toFixed(1)}`;
}

export function buildScene(
  snapshot: GraphSnapshot,
  options: SceneOptions = {},
): SceneModel {
  const graph = snapshot.graph;
  const positions = layoutGraph(graph, options.seed ?? 1);
  const visited = new Set(options.visitedEdgeIds ?? []);
  const pruneFlagged = new Set(options.pruneEdgeIds ?? []);

  const visitedNodes = new Set<string>();
  for (const edgeId of visited) {
    const edge = graph.edges[edgeId];
    if (edge) {
      visitedNodes.add(edge.from);
      visitedNodes.add(edge.to);
    }
  }

  const nodes: NodeSprite[] = Object.keys(graph.nodes)
    .sort()
    .map((id) => {
      const node = graph.nodes[id]!;
      return {
        id,
        label: node.label,
        kind: node.kind,
        at: positions.get(id) ?? { x: 0, y: 0 },
        onVisitedPath: visitedNodes.has(id),
      };
    });

  const edges: EdgeSprite[] = Object.keys(graph.edges)
    .sort()
    .map((id) => {
      const edge = graph.edges[id]!;
      const styleKey: EdgeStyleKey = pruneFlagged.has(id)
        ? "prune-candidate"
        : STATUS_STYLE[edge.status] ?? "active";
      const provenance = edge.shortcut_provenance ?? null;
      return {
        id,
        from: edge.from,
        to: edge.to,
        styleKey,
        badge: edgeBadge(edge.confidence, edge.weight),
        guard: edge.guard ?? null,
        tooltip:
          edge.status === "Shortcut" && provenance && provenance.length > 0
            ? `compresses: ${provenance.join(" → ")}`
            : null,
        onVisitedPath: visited.has(id),
      };
    });

  return {
    graphId: graph.graph_id,
    version: graph.version,
    promoted: graph.promoted,
    nodes,
    edges,
  };
}
