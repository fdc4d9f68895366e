/** Client for the auth service's HTTP shim.
 *
 * The shim wraps the newline-delimited JSON protocol in three endpoints:
 * `POST /api/connect` issues a connection token, `POST /api/send` forwards
 * one protocol message and returns its response, and `GET /api/layout`
 * serves the keyboard layout document the server itself uses.
 */

export interface LayoutKey {
  char: string;
  x: number;
  y: number;
}

export interface LayoutDoc {
  name: string;
  pitch: number;
  keys: LayoutKey[];
}

export type Action = "await_real" | "require_ghost" | "done";

export interface AlarmEvent {
  ts: string;
  user: string;
}

export interface ServerResponse {
  request_id?: number | null;
  ok: boolean;
  error?: string;
  message?: string;
  session?: string;
  action?: Action;
  ghost_char?: string;
  ghost?: string;
  mask?: boolean[];
  events?: AlarmEvent[];
}

export type FetchLike = (
  input: string,
  init?: {
    method?: string;
    body?: string;
    headers?: Record<string, string>;
  },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ProtocolError extends Error {
  constructor(
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ProtocolError";
  }
}

export class ShimClient {
  private token: string | null = null;
  private nextId = 1;
  private readonly fetchFn: FetchLike;

  constructor(
    readonly base: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? (globalThis.fetch.bind(globalThis) as FetchLike);
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    const resp = await this.fetchFn(this.base + path, {
      method: "POST",
      body: JSON.stringify(body),
      headers: { "Content-Type": "application/json" },
    });
    return resp.json();
  }

  /** Obtain a connection token. Must be called before send(). */
  async connect(): Promise<void> {
    const reply = (await this.post("/api/connect", {})) as { token?: string };
    if (typeof reply.token !== "string") {
      throw new ProtocolError("bad-envelope", "connect returned no token");
    }
    this.token = reply.token;
  }

  /** Fetch the layout document the server renders keys from. */
  async layout(): Promise<LayoutDoc> {
    const resp = await this.fetchFn(this.base + "/api/layout");
    const doc = (await resp.json()) as LayoutDoc;
    if (!Array.isArray(doc.keys) || doc.keys.length === 0) {
      throw new ProtocolError("bad-envelope", "layout document has no keys");
    }
    return doc;
  }

  /** Send one protocol message; resolves to the protocol-level response.
   * Protocol failures (ok: false) are returned, not thrown, so callers can
   * treat login rejection as a normal outcome; transport and envelope
   * problems throw. */
  async send(message: Record<string, unknown>): Promise<ServerResponse> {
    if (this.token === null) {
      throw new ProtocolError("no-token", "call connect() first");
    }
    const requestId = this.nextId++;
    const reply = (await this.post("/api/send", {
      token: this.token,
      message: { ...message, request_id: requestId },
    })) as ServerResponse & { error?: string };
    if (reply.error === "unknown-token" || reply.error === "bad-envelope") {
      throw new ProtocolError(reply.error, "shim rejected the envelope");
    }
    if (reply.request_id !== requestId) {
      throw new ProtocolError(
        "bad-envelope",
        `response for request ${reply.request_id}, expected ${requestId}`,
      );
    }
    return reply;
  }
}
