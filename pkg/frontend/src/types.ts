// Wire types mirroring the service's JSON payloads. The console renders
// these verbatim; it never invents nodes, edges, or moves of its own.

export type EdgeStatusName =
  | "Active"
  | "Provisional"
  | "Shortcut"
  | "Retired";

export interface GraphNode {
  id: string;
  kind: string;
  label: string;
  slot_key?: string | null;
  provenance?: string[];
}

export interface GraphEdge {
  id: string;
  from: string;
  to: string;
  confidence: number;
  weight: number;
  status: EdgeStatusName;
  guard?: string | null;
  shortcut_provenance?: string[] | null;
  support?: { entries: unknown[] };
}

export interface GraphPayload {
  graph_id: string;
  version: number;
  promoted: boolean;
  nodes: Record<string, GraphNode>;
  edges: Record<string, GraphEdge>;
  roots: string[];
}

export interface GraphSnapshot {
  checksum: string;
  format_version: number;
  config: Record<string, number>;
  graph: GraphPayload;
}

export interface CreateGraphResponse {
  graph_id: string;
  version: number;
  promoted: boolean;
  source: "graft" | "merge";
  review_items: ReviewItem[];
  report?: Record<string, unknown>;
}

export interface EditOpRequest {
  op_kind: string;
  payload: Record<string, unknown>;
  actor?: { kind: string; id: string };
}

export interface EditResult {
  applied: boolean;
  seq: number;
  version: number;
  reason: string | null;
  detail: string | null;
  cycle: string[] | null;
  created_id: string | null;
}

export interface ReviewItem {
  item_id: string;
  kind: string;
  status: "Pending" | "Approved" | "Rejected";
  subject_ids: string[];
  evidence: Record<string, unknown>;
  cooldown_until_turn: number;
}

export interface AuditRecord {
  seq: number;
  timestamp: number;
  graph_id: string;
  pre_version: number;
  op: {
    op_kind: string;
    actor: { kind: string; id: string | null };
    payload: Record<string, unknown>;
  };
  result: { status: "Applied" | "Rejected"; reason?: string; detail?: string };
}

export type MoveKindName = "Ask" | "Answer" | "Refuse" | "Escalate";

export interface Move {
  kind: MoveKindName;
  text: string;
  blocked_by: string[];
  warnings: string[];
  hops: string[];
  asked_slot: string | null;
  review_item_id: string | null;
}

export interface TurnResponse {
  move: Move;
  status: "Open" | "Closed" | "Escalated";
  current_node: string | null;
  pending_question: string | null;
  visited_edge_ids: string[];
}

export interface SessionInfo {
  session_id: string;
  graph_id: string;
  status: "Open" | "Closed" | "Escalated";
  current_node: string | null;
}

export interface FeedbackResponse {
  report: {
    delta_p: number;
    delta_w: number;
    applied: Array<{ edge_id: string; [key: string]: unknown }>;
    skipped: string[];
  };
  version: number;
}
