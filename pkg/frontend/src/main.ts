import { ConsoleApi } from "./api";
import { attachPanZoom, paintScene } from "./canvas";
import { renderBanners, renderDialogue, renderReviewQueue, renderToasts } from "./panels";
import { ConsoleStore } from "./store";

const api = new ConsoleApi(
  (import.meta.env.VITE_API_BASE as string | undefined) ?? "http://127.0.0.1:8000",
);

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

let store: ConsoleStore | null = null;

const canvas = el<HTMLCanvasElement>("graph-canvas");
const view = attachPanZoom(canvas, repaint);

function repaint(): void {
  if (!store) return;
  const scene = store.scene();
  if (scene) {
    paintScene(canvas, scene, view);
    el("graph-meta").textContent =
      `${scene.graphId} · version ${scene.version}` +
      (scene.promoted ? " · promoted" : " · draft");
  }
  renderBanners(el("banners"), store);
  renderToasts(el("toasts"), store.toasts);
  renderReviewQueue(el("review-queue"), store.reviews, (itemId, verdict) => {
    void store?.resolveReview(itemId, verdict).then(repaint);
  });
  renderDialogue(el("dialogue-lines"), store.dialogue?.lines ?? []);
  const closed = store.dialogue !== null && store.dialogue.status !== "Open";
  el("feedback-controls").style.display =
    closed && !store.dialogue?.feedbackSent ? "block" : "none";
}

async function switchGraph(graphId: string): Promise<void> {
  store = new ConsoleStore(api, graphId);
  await store.refresh();
  repaint();
}

async function bootstrap(): Promise<void> {
  const listing = await api.listGraphs();
  const picker = el<HTMLSelectElement>("graph-picker");
  for (const graphId of listing.graph_ids) {
    const option = document.createElement("option");
    option.value = graphId;
    option.textContent = graphId;
    picker.appendChild(option);
  }
  picker.addEventListener("change", () => void switchGraph(picker.value));
  const first = listing.graph_ids[0];
  if (first) await switchGraph(first);

  el("open-session").addEventListener("click", () => {
    void store?.openDialogue().then(repaint);
  });
  const input = el<HTMLInputElement>("utterance");
  el("send-turn").addEventListener("click", () => {
    const text = input.value.trim();
    if (!text || !store?.dialogue) return;
    input.value = "";
    void store.sendUtterance(text).then(repaint);
  });
  for (const outcome of ["Success", "Failure"] as const) {
    el(`feedback-${outcome.toLowerCase()}`).addEventListener("click", () => {
      void store?.sendFeedback(outcome).then(repaint);
    });
  }

  const editForm = el<HTMLFormElement>("edit-form");
  editForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!store) return;
    const kind = el<HTMLSelectElement>("edit-kind").value;
    let payloadText = el<HTMLTextAreaElement>("edit-payload").value;
    if (payloadText.trim() === "") payloadText = "{}";
    let payload: Record<string, unknown>;
    try {
      payload = JSON.parse(payloadText) as Record<string, unknown>;
    } catch {
      store.toasts.push({ kind: "info", text: "payload is not valid JSON" });
      repaint();
      return;
    }
    void store
      .submitEdit({ op_kind: kind, payload, actor: { kind: "Expert", id: "console" } })
      .then(repaint);
  });

  // watch for other actors bumping the version; banner offers a refresh
  setInterval(() => {
    void store?.checkForNewerVersion().then(repaint);
  }, 5000);
}

void bootstrap().catch(() => {
  const banner = document.createElement("div");
  banner.className = "banner banner-offline";
  banner.textContent = "service unreachable, start it and reload";
  el("banners").appendChild(banner);
});
