import { ApiError, ConnectionError, ConsoleApi } from "./api";
import { buildScene, type SceneModel } from "./scene";
import { expertLine, moveLine, type DialogueLine } from "./transcript";
import type {
  EditOpRequest,
  EditResult,
  GraphSnapshot,
  ReviewItem,
  TurnResponse,
} from "./types";

export interface Toast {
  kind: "rejection" | "conflict" | "applied" | "info";
  text: string;
}

export type GestureOutcome =
  | { kind: "blocked-client"; message: string }
  | { kind: "applied"; result: EditResult }
  | { kind: "rejected"; result: EditResult };

/** Client-side validation: gestures that cannot be well-formed never reach
 * the wire, so a blocked gesture costs zero requests and zero audit rows. */
export function validateEdit(op: EditOpRequest): string | null {
  const payload = op.payload as {
    node?: { label?: unknown };
    changes?: { label?: unknown };
  };
  const label =
    op.op_kind === "AddNode"
      ? payload.node?.label
      : op.op_kind === "ModifyNode"
        ? payload.changes?.label
        : undefined;
  if (typeof label === "string" && label.trim() === "") {
    return "node label must not be empty";
  }
  return null;
}

export function rejectionToast(result: EditResult): Toast {
  const cycle = result.cycle && result.cycle.length > 0
    ? `, cycle through ${result.cycle.join(", ")}`
    : "";
  return {
    kind: "rejection",
    text: `edit rejected: ${result.reason ?? "unknown"}${cycle}`,
  };
}

export function isStale(viewVersion: number, serverVersion: number): boolean {
  return serverVersion > viewVersion;
}

interface DialogueState {
  sessionId: string;
  status: "Open" | "Closed" | "Escalated";
  lines: DialogueLine[];
  visitedEdgeIds: string[];
  feedbackSent: boolean;
}

/**
 * Single source of truth for one graph tab. The server wins every argument:
 * mutations never touch local state directly, the view only changes when a
 * fresh snapshot says so.
 */
export class ConsoleStore {
  snapshot: GraphSnapshot | null = null;
  reviews: ReviewItem[] = [];
  dialogue: DialogueState | null = null;
  toasts: Toast[] = [];
  staleBanner = false;
  connectionBanner = false;

  constructor(
    readonly api: ConsoleApi,
    readonly graphId: string,
  ) {}

  get viewVersion(): number {
    return this.snapshot?.graph.version ?? 0;
  }

  /** Edge ids of still-pending prune suggestions, for canvas restyling. */
  get pruneFlaggedEdgeIds(): string[] {
    const ids: string[] = [];
    for (const item of this.reviews) {
      if (item.kind === "PruneCandidate" && item.status === "Pending") {
        ids.push(...item.subject_ids);
      }
    }
    return ids;
  }

  scene(): SceneModel | null {
    if (!this.snapshot) return null;
    return buildScene(this.snapshot, {
      visitedEdgeIds: this.dialogue?.visitedEdgeIds ?? [],
      pruneEdgeIds: this.pruneFlaggedEdgeIds,
    });
  }

  async refresh(): Promise<void> {
    try {
      this.snapshot = await this.api.getGraph(this.graphId);
      this.reviews = (await this.api.listReviews(this.graphId)).items;
      this.connectionBanner = false;
      this.staleBanner = false;
    } catch (err) {
      if (err instanceof ConnectionError) {
        this.connectionBanner = true;
        return;
      }
      throw err;
    }
  }

  /** Compare the rendered version against the server's; raise the stale
   * banner when another actor has moved the graph on. */
  async checkForNewerVersion(): Promise<void> {
    try {
      const fresh = await this.api.getGraph(this.graphId);
      if (isStale(this.viewVersion, fresh.graph.version)) {
        this.staleBanner = true;
      }
      this.connectionBanner = false;
    } catch (err) {
      if (err instanceof ConnectionError) {
        this.connectionBanner = true;
        return;
      }
      throw err;
    }
  }

  /**
   * One gesture, at most one request. Applied edits re-pull the snapshot
   * (no optimistic mutation); rejected edits leave the view bit-identical
   * and surface a toast with the server's reason.
   */
  async submitEdit(op: EditOpRequest): Promise<GestureOutcome> {
    const clientError = validateEdit(op);
    if (clientError !== null) {
      this.toasts.push({ kind: "info", text: clientError });
      return { kind: "blocked-client", message: clientError };
    }
    const result = await this.api.submitEdit(this.graphId, op);
    if (result.applied) {
      await this.refresh();
      this.toasts.push({ kind: "applied", text: `edit applied, version ${result.version}` });
      return { kind: "applied", result };
    }
    this.toasts.push(rejectionToast(result));
    return { kind: "rejected", result };
  }

  /** Approve or reject a queued review item; a lost race (someone else
   * resolved it first) becomes a toast, not a broken queue. */
  async resolveReview(
    itemId: string,
    verdict: "Approve" | "Reject",
  ): Promise<"resolved" | "conflict"> {
    try {
      await this.api.resolveReview(this.graphId, itemId, verdict);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.toasts.push({ kind: "conflict", text: `review ${itemId} was already resolved` });
        await this.refresh();
        return "conflict";
      }
      throw err;
    }
    await this.refresh();
    return "resolved";
  }

  async openDialogue(): Promise<void> {
    const info = await this.api.openSession(this.graphId);
    this.dialogue = {
      sessionId: info.session_id,
      status: info.status,
      lines: [],
      visitedEdgeIds: [],
      feedbackSent: false,
    };
  }

  async sendUtterance(utterance: string): Promise<TurnResponse> {
    if (!this.dialogue) throw new Error("no open session");
    const response = await this.api.sendTurn(this.dialogue.sessionId, utterance);
    this.dialogue.lines.push(expertLine(utterance));
    this.dialogue.lines.push(moveLine(response.move));
    this.dialogue.status = response.status;
    this.dialogue.visitedEdgeIds = response.visited_edge_ids;
    return response;
  }

  /** End-of-session verdict; afterwards the snapshot is re-pulled so the
   * (P, w) badges reflect what the server actually did. */
  async sendFeedback(outcome: "Success" | "Failure") {
    if (!this.dialogue) throw new Error("no open session");
    const response = await this.api.sendFeedback(this.dialogue.sessionId, outcome);
    this.dialogue.feedbackSent = true;
    await this.refresh();
    return response;
  }
}
