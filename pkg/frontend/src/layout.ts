import type { GraphPayload } from "./types";

export interface Point {
  x: number;
  y: number;
}

// Deterministic PRNG so the same graph always lands in the same place and
// screenshots are reproducible. The server knows nothing about positions.
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function longestPathLayers(graph: GraphPayload): Map<string, number> {
  const layers = new Map<string, number>();
  const ids = Object.keys(graph.nodes).sort();
  for (const id of ids) layers.set(id, 0);
  // edges of every status participate, so retired history still reads
  // left to right; the graph is acyclic so |V| sweeps suffice
  const edges = Object.values(graph.edges)
    .filter((e) => e.from in graph.nodes && e.to in graph.nodes)
    .sort((a, b) => (a.id < b.id ? -1 : 1));
  for (let sweep = 0; sweep < ids.length; sweep += 1) {
    let moved = false;
    for (const edge of edges) {
      const want = (layers.get(edge.from) ?? 0) + 1;
      if (want > (layers.get(edge.to) ?? 0)) {
        layers.set(edge.to, want);
        moved = true;
      }
    }
    if (!moved) break;
  }
  return layers;
}

/**
 * Seeded layered layout: columns follow longest-path depth from the roots,
 * rows are ordered by node id with a small seeded jitter. Same snapshot and
 * seed, same pixels.
 */
export function layoutGraph(graph: GraphPayload, seed = 1): Map<string, Point> {
  const rand = mulberry32(seed);
  const layers = longestPathLayers(graph);
  const byLayer = new Map<number, string[]>();
  for (const id of Object.keys(graph.nodes).sort()) {
    const layer = layers.get(id) ?? 0;
    const bucket = byLayer.get(layer);
    if (bucket) bucket.push(id);
    else byLayer.set(layer, [id]);
  }
  const positions = new Map<string, Point>();
  const colWidth = 180;
  const rowHeight = 90;
  for (const [layer, bucket] of [...byLayer.entries()].sort((a, b) => a[0] - b[0])) {
    bucket.forEach((id, row) => {
      positions.set(id, {
        x: 60 + layer * colWidth + Math.round(rand() * 18),
        y: 60 + row * rowHeight + Math.round(rand() * 14),
      });
    });
  }
  return positions;
}
