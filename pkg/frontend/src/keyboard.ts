/** On-screen keyboard rendered from the server's layout document.
 *
 * Keys are absolutely positioned from the document's (x, y) coordinates
 * (key-pitch units). Gating is enforced here *and* in the session
 * controller: a disabled key is both unclickable in the DOM and rejected
 * by `SessionController.press`, so no message can be emitted either way.
 * Physical keystrokes are mapped onto the same on-screen keys and pass
 * through the identical gate.
 */

import type { LayoutDoc } from "./protocol.js";
import type { Gate } from "./session.js";

const SCALE = 46; // px per key-pitch unit
const KEY_SIZE = 40;

export class Keyboard {
  private readonly buttons = new Map<string, HTMLButtonElement>();
  private keydownHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly container: HTMLElement,
    layout: LayoutDoc,
    private readonly onPress: (char: string) => void,
  ) {
    container.classList.add("keyboard");
    container.textContent = "";
    let maxX = 0;
    let maxY = 0;
    for (const key of layout.keys) {
      const btn = container.ownerDocument.createElement("button");
      btn.type = "button";
      btn.className = "key";
      btn.textContent = key.char;
      btn.dataset.char = key.char;
      btn.style.left = `${key.x * SCALE}px`;
      btn.style.top = `${key.y * SCALE}px`;
      btn.addEventListener("click", () => {
        if (!btn.disabled) this.onPress(key.char);
      });
      container.appendChild(btn);
      this.buttons.set(key.char, btn);
      maxX = Math.max(maxX, key.x);
      maxY = Math.max(maxY, key.y);
    }
    container.style.width = `${maxX * SCALE + KEY_SIZE + 8}px`;
    container.style.height = `${maxY * SCALE + KEY_SIZE + 8}px`;
    this.applyGate({ mode: "locked" });
  }

  /** Enable/disable keys to match the session gate. */
  applyGate(gate: Gate): void {
    for (const [char, btn] of this.buttons) {
      const enabled =
        gate.mode === "open" ||
        (gate.mode === "ghost-only" && gate.char === char);
      btn.disabled = !enabled;
      btn.classList.toggle("ghost-demand", gate.mode === "ghost-only" && gate.char === char);
    }
  }

  /** Route physical typing onto the on-screen keys (same gating). */
  attachPhysical(target: { addEventListener: HTMLElement["addEventListener"] }): void {
    this.keydownHandler = (ev: KeyboardEvent) => {
      if (ev.key.length !== 1) return; // ignore control/navigation keys
      const btn = this.buttons.get(ev.key);
      if (btn === undefined) return; // not a supported character
      ev.preventDefault();
      if (!btn.disabled) this.onPress(ev.key);
    };
    target.addEventListener("keydown", this.keydownHandler as EventListener);
  }

  key(char: string): HTMLButtonElement | undefined {
    return this.buttons.get(char);
  }
}
