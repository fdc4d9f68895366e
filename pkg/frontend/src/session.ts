/** Interactive typing session: state machine and key gating.
 *
 * The server drives entry through three actions. `await_real` means any
 * key is allowed and the next press is a real password character.
 * `require_ghost` means exactly one key — the demanded ghost character —
 * is enabled; everything else is disabled and a press on a disabled key
 * must emit no message at all. `done` ends the session and reveals the
 * ghost record.
 */

import type { Action, ServerResponse } from "./protocol.js";

/** The slice of the protocol client a session needs (lets tests script
 * server behaviour without a network). */
export interface MessageSender {
  send(message: Record<string, unknown>): Promise<ServerResponse>;
}

export type Gate =
  | { mode: "locked" }
  | { mode: "open" }
  | { mode: "ghost-only"; char: string };

export interface TraceEntry {
  action: Action;
  ghost_char?: string;
}

export interface SessionResult {
  session: string;
  ghost: string;
  mask: boolean[];
}

export type Phase = "idle" | "typing" | "draining" | "done";

export class SessionController {
  phase: Phase = "idle";
  /** every action the server prompted, in order */
  readonly trace: TraceEntry[] = [];
  /** count of keystrokes accepted so far (for the masked display) */
  typedCount = 0;
  result: SessionResult | null = null;

  private sessionId: string | null = null;
  private pending: Action | null = null;
  private pendingGhost: string | null = null;

  constructor(private readonly client: MessageSender) {}

  /** Start a typing session for `user`. */
  async start(user: string): Promise<void> {
    if (this.phase !== "idle") {
      throw new Error("session already started");
    }
    const resp = await this.client.send({ op: "session_start", user });
    if (!resp.ok || typeof resp.session !== "string") {
      throw new Error(resp.message ?? "session_start failed");
    }
    this.sessionId = resp.session;
    this.phase = "typing";
    this.record(resp);
  }

  /** Current gating decision for the keyboard. */
  gate(): Gate {
    if (this.phase === "idle" || this.phase === "done") {
      return { mode: "locked" };
    }
    if (this.pending === "require_ghost" && this.pendingGhost !== null) {
      return { mode: "ghost-only", char: this.pendingGhost };
    }
    if (this.pending === "await_real" && this.phase === "typing") {
      return { mode: "open" };
    }
    return { mode: "locked" };
  }

  canPress(char: string): boolean {
    const gate = this.gate();
    if (gate.mode === "open") return true;
    if (gate.mode === "ghost-only") return gate.char === char;
    return false;
  }

  /** Press one key. Returns true if a message was sent; a press on a
   * disabled key is a no-op and sends nothing. */
  async press(char: string): Promise<boolean> {
    if (!this.canPress(char)) {
      return false;
    }
    const resp = await this.client.send({
      op: "session_key",
      session: this.sessionId,
      char,
    });
    if (!resp.ok) {
      throw new Error(resp.message ?? `key rejected (${resp.error})`);
    }
    this.typedCount += 1;
    this.record(resp);
    return true;
  }

  /** Declare the real password complete; trailing ghost demands follow. */
  async finishEntry(): Promise<boolean> {
    if (this.phase !== "typing" || this.gate().mode !== "open") {
      return false;
    }
    const resp = await this.client.send({
      op: "session_finalize",
      session: this.sessionId,
    });
    if (!resp.ok) {
      throw new Error(resp.message ?? `finalize rejected (${resp.error})`);
    }
    this.phase = "draining";
    this.record(resp);
    return true;
  }

  private record(resp: ServerResponse): void {
    const action = resp.action;
    if (action === undefined) {
      throw new Error("server response carried no action");
    }
    const entry: TraceEntry = { action };
    if (action === "require_ghost") {
      if (typeof resp.ghost_char !== "string") {
        throw new Error("require_ghost without ghost_char");
      }
      entry.ghost_char = resp.ghost_char;
      this.pendingGhost = resp.ghost_char;
    } else {
      this.pendingGhost = null;
    }
    this.trace.push(entry);
    this.pending = action;
    if (action === "done") {
      if (typeof resp.ghost !== "string" || !Array.isArray(resp.mask)) {
        throw new Error("done without ghost record");
      }
      this.result = {
        session: this.sessionId as string,
        ghost: resp.ghost,
        mask: resp.mask,
      };
      this.phase = "done";
    }
  }
}

/** Real characters of a completed session (zeros of the mask). */
export function extractReal(result: SessionResult): string {
  let out = "";
  for (let i = 0; i < result.ghost.length; i++) {
    if (!result.mask[i]) out += result.ghost[i];
  }
  return out;
}
