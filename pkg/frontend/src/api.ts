import type {
  AuditRecord,
  CreateGraphResponse,
  EditOpRequest,
  EditResult,
  FeedbackResponse,
  GraphSnapshot,
  ReviewItem,
  SessionInfo,
  TurnResponse,
} from "./types";

/** Server answered with an error payload. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: Record<string, unknown>,
  ) {
    super(`${status}: ${JSON.stringify(body)}`);
  }
}

/** The service could not be reached at all. */
export class ConnectionError extends Error {
  constructor(readonly cause2: unknown) {
    super("service unreachable");
  }
}

async function parseBody(response: Response): Promise<Record<string, unknown>> {
  try {
    return (await response.json()) as Record<string, unknown>;
  } catch {
    return { error: "BadResponse", detail: response.statusText };
  }
}

export class ConsoleApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? {} : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ConnectionError(err);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await parseBody(response));
    }
    return (await response.json()) as T;
  }

  createGraphFromRules(rules: unknown[]): Promise<CreateGraphResponse> {
    return this.request("POST", "/graphs", { rules });
  }

  createGraphFromChains(chains: unknown[]): Promise<CreateGraphResponse> {
    return this.request("POST", "/graphs", { chains });
  }

  listGraphs(): Promise<{ graph_ids: string[] }> {
    return this.request("GET", "/graphs");
  }

  getGraph(graphId: string): Promise<GraphSnapshot> {
    return this.request("GET", `/graphs/${graphId}`);
  }

  /**
   * One gesture, one POST. Rejections come back in the same result shape
   * as applications (the server answers 409/404/422 with the edit result
   * in the body), so callers branch on `applied`, never on exceptions.
   */
  async submitEdit(graphId: string, op: EditOpRequest): Promise<EditResult> {
    try {
      return await this.request<EditResult>("POST", `/graphs/${graphId}/edits`, op);
    } catch (err) {
      if (err instanceof ApiError && "applied" in err.body) {
        return err.body as unknown as EditResult;
      }
      throw err;
    }
  }

  listReviews(graphId: string, status?: string): Promise<{ items: ReviewItem[] }> {
    const query = status === undefined ? "" : `?status=${encodeURIComponent(status)}`;
    return this.request("GET", `/graphs/${graphId}/reviews${query}`);
  }

  resolveReview(
    graphId: string,
    itemId: string,
    verdict: "Approve" | "Reject",
  ): Promise<{ item: ReviewItem; version: number }> {
    return this.request("POST", `/graphs/${graphId}/reviews/${itemId}`, { verdict });
  }

  openSession(graphId: string): Promise<SessionInfo> {
    return this.request("POST", `/graphs/${graphId}/sessions`);
  }

  sendTurn(sessionId: string, utterance: string): Promise<TurnResponse> {
    return this.request("POST", `/sessions/${sessionId}/turns`, { utterance });
  }

  sendFeedback(
    sessionId: string,
    outcome: "Success" | "Failure",
  ): Promise<FeedbackResponse> {
    return this.request("POST", `/sessions/${sessionId}/feedback`, { outcome });
  }

  getAudit(graphId: string, fromSeq = 1): Promise<{ records: AuditRecord[] }> {
    return this.request("GET", `/graphs/${graphId}/audit?from_seq=${fromSeq}`);
  }

  consolidate(graphId: string): Promise<Record<string, unknown>> {
    return this.request("POST", `/graphs/${graphId}/consolidate`);
  }
}
