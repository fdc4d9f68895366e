import { describe, expect, it } from "vitest";

import { ProtocolError, ShimClient, type FetchLike } from "../src/protocol.js";

interface Call {
  url: string;
  body: unknown;
}

/** Fetch stub that answers from a queue and records every request. */
function fakeFetch(replies: unknown[]): { fetch: FetchLike; calls: Call[] } {
  const calls: Call[] = [];
  const fetch: FetchLike = async (url, init) => {
    calls.push({
      url,
      body: init?.body === undefined ? undefined : JSON.parse(init.body),
    });
    const reply = replies.shift();
    if (reply === undefined) throw new Error("fetch queue exhausted");
    return { ok: true, status: 200, json: async () => reply };
  };
  return { fetch, calls };
}

describe("ShimClient", () => {
  it("connects, then sends messages with its token and fresh request ids", async () => {
    const { fetch, calls } = fakeFetch([
      { token: "tok-1" },
      { request_id: 1, ok: true },
      { request_id: 2, ok: false, error: "bad-password", message: "nope" },
    ]);
    const client = new ShimClient("http://service", fetch);
    await client.connect();

    const first = await client.send({ op: "register", user: "a", password: "b" });
    expect(first.ok).toBe(true);

    // protocol-level failures come back as values, not exceptions
    const second = await client.send({ op: "register", user: "a", password: "" });
    expect(second.ok).toBe(false);
    expect(second.error).toBe("bad-password");

    expect(calls.map((c) => c.url)).toEqual([
      "http://service/api/connect",
      "http://service/api/send",
      "http://service/api/send",
    ]);
    const sent = calls.slice(1).map((c) => c.body as { token: string; message: { request_id: number } });
    expect(sent.every((c) => c.token === "tok-1")).toBe(true);
    expect(sent.map((c) => c.message.request_id)).toEqual([1, 2]);
  });

  it("refuses to send before connect()", async () => {
    const { fetch } = fakeFetch([]);
    const client = new ShimClient("", fetch);
    await expect(client.send({ op: "login" })).rejects.toThrow(ProtocolError);
  });

  it("throws on shim envelope errors", async () => {
    const { fetch } = fakeFetch([{ token: "t" }, { error: "unknown-token" }]);
    const client = new ShimClient("", fetch);
    await client.connect();
    await expect(client.send({ op: "login" })).rejects.toMatchObject({
      name: "ProtocolError",
      code: "unknown-token",
    });
  });

  it("throws when the response echoes the wrong request id", async () => {
    const { fetch } = fakeFetch([{ token: "t" }, { request_id: 99, ok: true }]);
    const client = new ShimClient("", fetch);
    await client.connect();
    await expect(client.send({ op: "login" })).rejects.toThrow(/request 99/);
  });

  it("validates the layout document", async () => {
    const { fetch } = fakeFetch([
      { name: "ansi", pitch: 19, keys: [{ char: "a", x: 0, y: 0 }] },
      { name: "broken", pitch: 19, keys: [] },
    ]);
    const client = new ShimClient("", fetch);
    const doc = await client.layout();
    expect(doc.name).toBe("ansi");
    expect(doc.keys).toHaveLength(1);
    await expect(client.layout()).rejects.toThrow(/no keys/);
  });
});
