/** Demo page wiring: registration, interactive ghost-typing entry with the
 * on-screen keyboard, masked display, post-completion reveal, prompt-trace
 * replay, and login (including an "attacker replay" that submits the
 * observed ghost string). */

import { Keyboard } from "./keyboard.js";
import { loginPanel, maskedEntry, replaySteps, revealCells } from "./panels.js";
import { ShimClient } from "./protocol.js";
import { SessionController } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function setStatus(text: string, cls = ""): void {
  const status = el<HTMLElement>("status");
  status.textContent = text;
  status.className = cls;
}

async function main(): Promise<void> {
  const client = new ShimClient("");
  await client.connect();
  const layout = await client.layout();
  el<HTMLElement>("layout-name").textContent = layout.name;

  let session: SessionController | null = null;
  let keyboard: Keyboard | null = null;
  let lastGhost: string | null = null;

  const refresh = (): void => {
    const gate = session?.gate() ?? { mode: "locked" as const };
    keyboard?.applyGate(gate);
    el<HTMLElement>("entry").textContent = maskedEntry(session?.typedCount ?? 0);
    const prompt = el<HTMLElement>("prompt");
    if (gate.mode === "ghost-only") {
      prompt.textContent = `type the highlighted key: ${gate.char}`;
      prompt.className = "prompt ghost";
    } else if (gate.mode === "open") {
      prompt.textContent =
        session?.phase === "typing"
          ? "type your next password character (or finish)"
          : "";
      prompt.className = "prompt";
    } else {
      prompt.textContent = session?.phase === "done" ? "entry complete" : "";
      prompt.className = "prompt";
    }
    el<HTMLButtonElement>("finish").disabled = gate.mode !== "open";

    const reveal = el<HTMLElement>("reveal");
    reveal.textContent = "";
    for (const cell of revealCells(session?.result ?? null)) {
      const span = document.createElement("span");
      span.textContent = cell.char;
      span.className = cell.ghost ? "cell ghost" : "cell real";
      span.title = cell.ghost ? "ghost keystroke" : "real character";
      reveal.appendChild(span);
    }
    const replay = el<HTMLElement>("replay");
    replay.textContent = "";
    for (const step of replaySteps(session?.trace ?? [])) {
      const li = document.createElement("li");
      li.textContent = step.label;
      if (step.ghost) li.className = "ghost";
      replay.appendChild(li);
    }
    if (session?.result) {
      lastGhost = session.result.ghost;
      el<HTMLButtonElement>("attack").disabled = false;
    }
  };

  const press = (char: string): void => {
    void session?.press(char).then((sent) => {
      if (sent) refresh();
    });
  };

  keyboard = new Keyboard(el("keyboard"), layout, press);
  keyboard.attachPhysical(document.body);

  el<HTMLButtonElement>("register").addEventListener("click", async () => {
    const user = el<HTMLInputElement>("user").value;
    const password = el<HTMLInputElement>("password").value;
    const resp = await client.send({ op: "register", user, password });
    setStatus(
      resp.ok ? `registered ${user}` : `register failed: ${resp.message}`,
      resp.ok ? "ok" : "bad",
    );
  });

  el<HTMLButtonElement>("start").addEventListener("click", async () => {
    session = new SessionController(client);
    await session.start(el<HTMLInputElement>("user").value);
    setStatus("session started — type on the keyboard below");
    refresh();
  });

  el<HTMLButtonElement>("finish").addEventListener("click", async () => {
    if (await session?.finishEntry()) refresh();
  });

  el<HTMLButtonElement>("login").addEventListener("click", async () => {
    const user = el<HTMLInputElement>("user").value;
    const body: Record<string, unknown> = {
      op: "login",
      user,
      password: el<HTMLInputElement>("password").value,
    };
    if (session?.result) body["session"] = session.result.session;
    const panel = loginPanel(await client.send(body));
    setStatus(panel.text, panel.kind === "success" ? "ok" : "bad");
  });

  el<HTMLButtonElement>("attack").addEventListener("click", async () => {
    if (lastGhost === null) return;
    const user = el<HTMLInputElement>("user").value;
    const panel = loginPanel(
      await client.send({ op: "login", user, password: lastGhost }),
    );
    setStatus(
      `attacker replayed the observed keystrokes — ${panel.text}`,
      panel.kind === "success" ? "bad" : "ok",
    );
  });

  setStatus("connected");
}

void main().catch((err) => setStatus(String(err), "bad"));
