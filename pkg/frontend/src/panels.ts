import type { ConsoleStore, Toast } from "./store";
import type { DialogueLine } from "./transcript";
import type { ReviewItem } from "./types";

// DOM panels. Each render function rebuilds its container from store state;
// none of them mutate the store, so the view stays a pure function of it.

function clear(el: HTMLElement): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

export function renderBanners(host: HTMLElement, store: ConsoleStore): void {
  clear(host);
  if (store.connectionBanner) {
    const div = host.ownerDocument.createElement("div");
    div.className = "banner banner-offline";
    div.textContent = "service unreachable, retrying";
    host.appendChild(div);
  }
  if (store.staleBanner) {
    const div = host.ownerDocument.createElement("div");
    div.className = "banner banner-stale";
    div.textContent = `another expert moved this graph past version ${store.viewVersion}`;
    const button = host.ownerDocument.createElement("button");
    button.textContent = "refresh";
    button.addEventListener("click", () => {
      void store.refresh();
    });
    div.appendChild(button);
    host.appendChild(div);
  }
}

export function renderToasts(host: HTMLElement, toasts: readonly Toast[]): void {
  clear(host);
  for (const toast of toasts.slice(-4)) {
    const div = host.ownerDocument.createElement("div");
    div.className = `toast toast-${toast.kind}`;
    div.textContent = toast.text;
    host.appendChild(div);
  }
}

export function renderReviewQueue(
  host: HTMLElement,
  items: readonly ReviewItem[],
  onResolve: (itemId: string, verdict: "Approve" | "Reject") => void,
): void {
  clear(host);
  const doc = host.ownerDocument;
  for (const item of items) {
    const row = doc.createElement("div");
    row.className = `review review-${item.status.toLowerCase()}`;
    const text = doc.createElement("span");
    text.textContent = `${item.kind} · ${item.subject_ids.join(", ")} · ${item.status}`;
    row.appendChild(text);
    if (item.status === "Pending") {
      for (const verdict of ["Approve", "Reject"] as const) {
        const button = doc.createElement("button");
        button.textContent = verdict.toLowerCase();
        button.addEventListener("click", () => onResolve(item.item_id, verdict));
        row.appendChild(button);
      }
    }
    host.appendChild(row);
  }
  if (items.length === 0) {
    const empty = doc.createElement("div");
    empty.className = "review-empty";
    empty.textContent = "no review items";
    host.appendChild(empty);
  }
}

export function renderDialogue(host: HTMLElement, lines: readonly DialogueLine[]): void {
  clear(host);
  const doc = host.ownerDocument;
  for (const line of lines) {
    const div = doc.createElement("div");
    div.className = `line ${line.cssClass}`;
    div.textContent = line.text;
    for (const detail of line.details) {
      const note = doc.createElement("div");
      note.className = "line-detail";
      note.textContent = detail;
      div.appendChild(note);
    }
    host.appendChild(div);
  }
  host.scrollTop = host.scrollHeight;
}
