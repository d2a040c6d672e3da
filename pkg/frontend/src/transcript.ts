import type { Move } from "./types";

// Dialogue console line model. Engine moves keep their server-assigned kind
// so the four move kinds render with four distinct styles, and the text
// shown is always exactly the server's move text: when the server withholds
// an answer the console has nothing else it could leak.

export interface DialogueLine {
  who: "expert" | "engine";
  cssClass: string;
  text: string;
  details: string[];
}

export function expertLine(utterance: string): DialogueLine {
  return { who: "expert", cssClass: "line-expert", text: utterance, details: [] };
}

const MOVE_CLASS: Record<Move["kind"], string> = {
  Ask: "move-ask",
  Answer: "move-answer",
  Refuse: "move-refuse",
  Escalate: "move-escalate",
};

export function moveLine(move: Move): DialogueLine {
  const details: string[] = [];
  if (move.kind === "Refuse" && move.blocked_by.length > 0) {
    details.push(`blocked by: ${move.blocked_by.join(", ")}`);
  }
  for (const warning of move.warnings) {
    details.push(`warning: ${warning}`);
  }
  if (move.kind === "Ask" && move.asked_slot) {
    details.push(`slot: ${move.asked_slot}`);
  }
  return {
    who: "engine",
    cssClass: MOVE_CLASS[move.kind],
    text: move.text,
    details,
  };
}
