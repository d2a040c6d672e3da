import { ConsoleApi } from "../src/api";
import type { GraphSnapshot } from "../src/types";
import { BASE_URL } from "./config";

export const api = new ConsoleApi(BASE_URL);

// Same little triage world the backend's own tests use: route dizziness by
// severity, and never let a severe case walk away with a printed referral.
export const TRIAGE_RULES = [
  {
    rule_id: "route-mild",
    condition: "slot(symptom) == 'dizziness' and slot(severity) == 'mild'",
    action: { kind: "RouteTo", label: "rest and fluids" },
    hardness: "Hard",
  },
  {
    rule_id: "route-severe",
    condition: "slot(symptom) == 'dizziness' and slot(severity) == 'severe'",
    action: { kind: "RouteTo", label: "emergency referral" },
    hardness: "Hard",
  },
];

export const BLOCK_REFERRAL_RULE = {
  rule_id: "hold-referral",
  condition: "slot(severity) == 'severe'",
  action: { kind: "ForbidOutputContaining", tokens: ["referral"] },
  hardness: "Hard",
};

export async function seedRuleGraph(extraRules: unknown[] = []): Promise<string> {
  const created = await api.createGraphFromRules([...TRIAGE_RULES, ...extraRules]);
  return created.graph_id;
}

// two linear chains over the same steps, enough to trigger a merge review
export function sampleChains(tag: string): unknown[] {
  const steps = [
    { id: "s0", label: "take the history", parent_id: null, confidence: 1.0 },
    { id: "s1", label: "check hydration", parent_id: "s0", confidence: 0.8 },
    { id: "s2", label: "advise rest", parent_id: "s1", confidence: 0.6 },
  ];
  return [
    { chain_id: `${tag}-a`, steps },
    { chain_id: `${tag}-b`, steps },
  ];
}

/** First parent/child pair along an Active edge, for cycle-drawing tests. */
export function firstParentChild(snapshot: GraphSnapshot): { parent: string; child: string } {
  const edgeIds = Object.keys(snapshot.graph.edges).sort();
  for (const id of edgeIds) {
    const edge = snapshot.graph.edges[id]!;
    if (edge.status === "Active") return { parent: edge.from, child: edge.to };
  }
  throw new Error("graph has no active edge");
}
