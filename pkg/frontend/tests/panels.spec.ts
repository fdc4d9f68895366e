import { describe, expect, it } from "vitest";

import {
  loginPanel,
  maskedEntry,
  replaySteps,
  revealCells,
} from "../src/panels.js";

describe("maskedEntry", () => {
  it("renders one identical glyph per accepted keystroke", () => {
    expect(maskedEntry(0)).toBe("");
    expect(maskedEntry(4)).toBe("••••");
    // ghosts and real characters must be indistinguishable while typing
    expect(new Set(maskedEntry(9)).size).toBe(1);
  });
});

describe("revealCells", () => {
  it("shows nothing while the session is incomplete", () => {
    expect(revealCells(null)).toEqual([]);
  });

  it("flags exactly the masked positions once complete", () => {
    const cells = revealCells({
      session: "s1",
      ghost: "abxc",
      mask: [false, false, true, false],
    });
    expect(cells.map((c) => c.char).join("")).toBe("abxc");
    expect(cells.map((c) => c.ghost)).toEqual([false, false, true, false]);
  });
});

describe("replaySteps", () => {
  it("narrates the prompt trace in order", () => {
    const steps = replaySteps([
      { action: "await_real" },
      { action: "require_ghost", ghost_char: "p" },
      { action: "done" },
    ]);
    expect(steps.map((s) => s.ghost)).toEqual([false, true, false]);
    expect(steps[1]?.label).toContain("'p'");
  });
});

describe("loginPanel", () => {
  it("maps outcomes without leaking why a login failed", () => {
    expect(loginPanel({ ok: true }).kind).toBe("success");
    const rejected = loginPanel({ ok: false });
    expect(rejected.kind).toBe("failure");
    // a honeyword hit must look exactly like any wrong password
    expect(rejected.text.toLowerCase()).not.toMatch(/honey|ghost|alarm/);
    expect(loginPanel({ ok: false, error: "bad-request" }).kind).toBe("error");
  });
});
