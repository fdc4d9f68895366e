/** Spawn the real authentication service for end-to-end tests.
 *
 * The demo is a separate package, so these tests talk to the service the
 * same way the browser does: a `ghostkeys serve` subprocess reached only
 * through its HTTP shim. Ports are picked fresh per spawn and the store is
 * in-memory, so every run starts from session `s1` with the same seed.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { createServer } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

export interface ServerHandle {
  httpBase: string;
  stop(): Promise<void>;
}

const FRONTEND_ROOT = dirname(dirname(fileURLToPath(import.meta.url)));

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no address"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
  });
}

async function waitReady(base: string, proc: ChildProcess, stderr: string[]): Promise<void> {
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(
        `server exited early (code ${proc.exitCode}): ${stderr.join("")}`,
      );
    }
    try {
      const resp = await fetch(`${base}/api/layout`);
      if (resp.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`server not ready within 20s: ${stderr.join("")}`);
}

/** Start `ghostkeys serve` with the demo shim enabled; seed is fixed so the
 * first typing session is reproducible. */
export async function startServer(seed = 0): Promise<ServerHandle> {
  const tcpPort = await freePort();
  const httpPort = await freePort();
  const proc = spawn(
    "python3",
    [
      "-m",
      "ghostkeys.cli",
      "serve",
      "--seed",
      String(seed),
      "--host",
      "127.0.0.1",
      "--port",
      String(tcpPort),
      "--http-port",
      String(httpPort),
      "--demo-dir",
      join(FRONTEND_ROOT, "dist"),
    ],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  const stderr: string[] = [];
  proc.stderr?.on("data", (chunk: Buffer) => stderr.push(chunk.toString()));

  const httpBase = `http://127.0.0.1:${httpPort}`;
  await waitReady(httpBase, proc, stderr);
  return {
    httpBase,
    stop: () =>
      new Promise<void>((resolve) => {
        proc.once("exit", () => resolve());
        proc.kill("SIGTERM");
        setTimeout(() => proc.kill("SIGKILL"), 5_000).unref();
      }),
  };
}
