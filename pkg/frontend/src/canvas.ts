import { EDGE_STROKES, type SceneModel } from "./scene";

// Thin painter: draws the scene model verbatim. Everything worth testing
// lives in the scene builder; this file only moves pixels.

export interface Viewport {
  panX: number;
  panY: number;
  zoom: number;
}

export function paintScene(
  canvas: HTMLCanvasElement,
  scene: SceneModel,
  view: Viewport,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.save();
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.translate(view.panX, view.panY);
  ctx.scale(view.zoom, view.zoom);

  const at = new Map(scene.nodes.map((n) => [n.id, n.at]));

  for (const edge of scene.edges) {
    const from = at.get(edge.from);
    const to = at.get(edge.to);
    if (!from || !to) continue;
    const stroke = EDGE_STROKES[edge.styleKey];
    ctx.beginPath();
    ctx.moveTo(from.x, from.y);
    ctx.lineTo(to.x, to.y);
    ctx.setLineDash(stroke.dash);
    ctx.lineWidth = edge.onVisitedPath ? stroke.width + 2 : stroke.width;
    ctx.strokeStyle = edge.onVisitedPath ? "#dc2626" : stroke.color;
    ctx.stroke();
    ctx.setLineDash([]);

    const midX = (from.x + to.x) / 2;
    const midY = (from.y + to.y) / 2;
    ctx.font = "10px ui-monospace, monospace";
    ctx.fillStyle = "#374151";
    ctx.fillText(edge.badge, midX + 4, midY - 4);
  }

  for (const node of scene.nodes) {
    ctx.beginPath();
    ctx.arc(node.at.x, node.at.y, 16, 0, Math.PI * 2);
    ctx.fillStyle = node.onVisitedPath ? "#fee2e2" : "#eff6ff";
    ctx.fill();
    ctx.lineWidth = node.onVisitedPath ? 3 : 1.5;
    ctx.strokeStyle = node.kind === "Terminal" ? "#047857" : "#1f2937";
    ctx.stroke();
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillStyle = "#111827";
    ctx.fillText(node.label.slice(0, 28), node.at.x - 14, node.at.y + 30);
  }
  ctx.restore();
}

/** Wire wheel-zoom and drag-pan onto a canvas; returns the live viewport. */
export function attachPanZoom(
  canvas: HTMLCanvasElement,
  repaint: () => void,
): Viewport {
  const view: Viewport = { panX: 0, panY: 0, zoom: 1 };
  let dragging = false;
  let lastX = 0;
  let lastY = 0;

  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.1 : 1 / 1.1;
    view.zoom = Math.min(4, Math.max(0.25, view.zoom * factor));
    repaint();
  });
  canvas.addEventListener("mousedown", (event) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  window.addEventListener("mousemove", (event) => {
    if (!dragging) return;
    view.panX += event.clientX - lastX;
    view.panY += event.clientY - lastY;
    lastX = event.clientX;
    lastY = event.clientY;
    repaint();
  });
  return view;
}
