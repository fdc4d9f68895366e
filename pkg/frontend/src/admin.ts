/** Admin alarm view: lists honeyword alarm events. The server only
 * answers admin ops for loopback peers, so this page works when the demo
 * is opened from the host running the service. */

import { ShimClient } from "./protocol.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

async function refresh(client: ShimClient): Promise<void> {
  const resp = await client.send({ op: "admin_alarms" });
  const tbody = el<HTMLElement>("alarms");
  const status = el<HTMLElement>("status");
  if (!resp.ok) {
    status.textContent = `cannot read alarms: ${resp.error}`;
    status.className = "bad";
    return;
  }
  const events = resp.events ?? [];
  status.textContent = `${events.length} alarm(s)`;
  status.className = events.length > 0 ? "bad" : "ok";
  tbody.textContent = "";
  for (const ev of events) {
    const row = document.createElement("tr");
    const ts = document.createElement("td");
    ts.textContent = ev.ts;
    const user = document.createElement("td");
    user.textContent = ev.user;
    row.append(ts, user);
    tbody.appendChild(row);
  }
}

async function main(): Promise<void> {
  const client = new ShimClient("");
  await client.connect();
  el<HTMLButtonElement>("refresh").addEventListener("click", () => {
    void refresh(client);
  });
  await refresh(client);
  setInterval(() => void refresh(client), 5000);
}

void main().catch((err) => {
  el<HTMLElement>("status").textContent = String(err);
});
