/** View models for the demo panels: masked entry, post-completion ghost
 * reveal, the prompt-trace replay, and login outcomes. Pure functions so
 * the DOM layer stays a thin projection. */

import type { ServerResponse } from "./protocol.js";
import type { SessionResult, TraceEntry } from "./session.js";

/** During entry every accepted keystroke renders as the same mask glyph:
 * the display must not reveal which presses were ghosts. */
export function maskedEntry(typedCount: number): string {
  return "•".repeat(typedCount);
}

export interface RevealCell {
  char: string;
  ghost: boolean;
}

/** Ghost flags may be shown only after the session completed. */
export function revealCells(result: SessionResult | null): RevealCell[] {
  if (result === null) return [];
  return Array.from(result.ghost, (char, i) => ({
    char,
    ghost: result.mask[i] === true,
  }));
}

export interface ReplayStep {
  label: string;
  ghost: boolean;
}

/** Human-readable replay of the prompt trace. */
export function replaySteps(trace: readonly TraceEntry[]): ReplayStep[] {
  const steps: ReplayStep[] = [];
  for (const entry of trace) {
    if (entry.action === "require_ghost") {
      steps.push({ label: `server demanded ghost '${entry.ghost_char}'`, ghost: true });
    } else if (entry.action === "await_real") {
      steps.push({ label: "server awaited a real character", ghost: false });
    } else {
      steps.push({ label: "session complete", ghost: false });
    }
  }
  return steps;
}

export type LoginPanel =
  | { kind: "success"; text: string }
  | { kind: "failure"; text: string }
  | { kind: "error"; text: string };

/** Outcome panel for a login response. A rejected login — including a
 * replayed ghost string — is a plain failure; the server never discloses
 * why. */
export function loginPanel(resp: ServerResponse): LoginPanel {
  if (resp.error !== undefined) {
    return { kind: "error", text: `${resp.error}: ${resp.message ?? ""}` };
  }
  if (resp.ok) {
    return { kind: "success", text: "login accepted" };
  }
  return { kind: "failure", text: "login rejected" };
}
