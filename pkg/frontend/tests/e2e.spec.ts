/** End-to-end tests against the real service.
 *
 * One `ghostkeys serve` subprocess (fixed seed, in-memory store) backs the
 * whole file; tests run in order and share a connection, mirroring one
 * browser session: register, type the password interactively, log in,
 * then replay the observed keystrokes as an attacker would.
 *
 * The golden trace captures what the seeded server prompted for session
 * `s1`. Regenerate with `GOLDEN_UPDATE=1 npx vitest run tests/e2e.spec.ts`
 * after a deliberate server-side change.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { loginPanel, maskedEntry } from "../src/panels.js";
import { ShimClient, type LayoutDoc } from "../src/protocol.js";
import {
  SessionController,
  extractReal,
  type SessionResult,
  type TraceEntry,
} from "../src/session.js";
import { startServer, type ServerHandle } from "./server.js";

const USER = "alice";
const PASSWORD = "marble-fox42";
const GOLDEN_PATH = join(
  dirname(fileURLToPath(import.meta.url)),
  "golden",
  "session_trace.json",
);

interface GoldenTrace {
  user: string;
  password: string;
  seed: number;
  trace: TraceEntry[];
  ghost: string;
  mask: boolean[];
}

/** Follow the server's prompts exactly as the demo page does: real
 * characters while the gate is open, the demanded key during a ghost
 * demand, finalize once the password is spent. */
async function typePassword(
  session: SessionController,
  password: string,
): Promise<SessionResult> {
  let next = 0;
  for (let guard = 0; guard < 400; guard++) {
    if (session.phase === "done") {
      if (session.result === null) throw new Error("done without result");
      return session.result;
    }
    const gate = session.gate();
    if (gate.mode === "ghost-only") {
      await session.press(gate.char);
    } else if (gate.mode === "open") {
      if (next < password.length) {
        await session.press(password.charAt(next));
        next += 1;
      } else {
        await session.finishEntry();
      }
    } else {
      throw new Error(`locked gate in phase ${session.phase}`);
    }
  }
  throw new Error("session did not complete within 400 steps");
}

let server: ServerHandle;
let client: ShimClient;
let layout: LayoutDoc;
let completed: SessionResult | null = null;

beforeAll(async () => {
  server = await startServer(0);
  client = new ShimClient(server.httpBase);
  await client.connect();
  layout = await client.layout();
}, 60_000);

afterAll(async () => {
  await server?.stop();
});

describe("live service", () => {
  it("serves the layout document the keyboard renders from", () => {
    expect(layout.name.length).toBeGreaterThan(0);
    expect(layout.pitch).toBeGreaterThan(0);
    const chars = new Set(layout.keys.map((k) => k.char));
    for (const char of PASSWORD) expect(chars.has(char)).toBe(true);
    for (const key of layout.keys) {
      expect(typeof key.x).toBe("number");
      expect(typeof key.y).toBe("number");
    }
  });

  it("registers the demo account", async () => {
    const resp = await client.send({ op: "register", user: USER, password: PASSWORD });
    expect(resp.ok).toBe(true);
  });

  it("reproduces the golden prompt trace for the seeded first session", async () => {
    const session = new SessionController(client);
    await session.start(USER);
    const result = await typePassword(session, PASSWORD);
    completed = result;

    // the observed string hides the password but extracts back to it
    expect(result.ghost).not.toBe(PASSWORD);
    expect(extractReal(result)).toBe(PASSWORD);
    expect(result.mask.filter(Boolean).length).toBeGreaterThanOrEqual(2);
    // masked display: one glyph per accepted keystroke, ghosts included
    expect(maskedEntry(session.typedCount)).toBe("•".repeat(result.ghost.length));

    const got: GoldenTrace = {
      user: USER,
      password: PASSWORD,
      seed: 0,
      trace: session.trace,
      ghost: result.ghost,
      mask: result.mask,
    };
    if (process.env["GOLDEN_UPDATE"] === "1") {
      writeFileSync(GOLDEN_PATH, JSON.stringify(got, null, 2) + "\n");
      return;
    }
    const golden = JSON.parse(readFileSync(GOLDEN_PATH, "utf-8")) as GoldenTrace;
    expect(got).toEqual(golden);
  });

  it("accepts a login backed by the completed session", async () => {
    expect(completed).not.toBeNull();
    const resp = await client.send({
      op: "login",
      user: USER,
      password: PASSWORD,
      session: completed!.session,
    });
    expect(loginPanel(resp)).toEqual({ kind: "success", text: "login accepted" });
  });

  it("rejects a replay of the observed keystrokes and raises one alarm", async () => {
    const before = await client.send({ op: "admin_alarms" });
    expect(before.ok).toBe(true);
    expect(before.events).toHaveLength(0);

    // the attacker submits exactly what a shoulder-surfer saw
    const attack = await client.send({
      op: "login",
      user: USER,
      password: completed!.ghost,
    });
    expect(loginPanel(attack).kind).toBe("failure");

    const after = await client.send({ op: "admin_alarms" });
    expect(after.events).toHaveLength(1);
    expect(after.events?.[0]?.user).toBe(USER);
    expect(typeof after.events?.[0]?.ts).toBe("string");
  });

  it("treats an ordinary wrong password as benign (no second alarm)", async () => {
    const resp = await client.send({
      op: "login",
      user: USER,
      password: "definitely-not-it-99",
    });
    expect(loginPanel(resp).kind).toBe("failure");
    const alarms = await client.send({ op: "admin_alarms" });
    expect(alarms.events).toHaveLength(1);
  });

  it("serves the demo pages from the built assets", async () => {
    const index = await fetch(`${server.httpBase}/demo/`);
    expect(index.status).toBe(200);
    const html = await index.text();
    expect(html).toContain('id="keyboard"');
    expect(html).toContain("/demo/js/app.js");

    const admin = await fetch(`${server.httpBase}/demo/admin`);
    expect(admin.status).toBe(200);
    expect(await admin.text()).toContain('id="alarms"');

    const app = await fetch(`${server.httpBase}/demo/js/app.js`);
    expect(app.status).toBe(200);

    const missing = await fetch(`${server.httpBase}/demo/js/nope.js`);
    expect(missing.status).toBe(404);
  });
});
