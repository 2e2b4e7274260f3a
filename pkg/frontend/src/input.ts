/**
 * Keyboard and slider input for joint adjustments.
 *
 * Bindings exist only for the guided joints; a held key repeats at a fixed
 * rate. The emitter is a callback so gating (active trial, open socket)
 * stays in the session client.
 */

import { adjustFrame, AdjustFrame } from "./protocol.js";

export interface Binding {
  key: string;
  joint: string;
  delta: number; // degrees per press
}

const KEY_ROWS: Record<string, [string, string]> = {
  torso: ["q", "a"],
  shoulder: ["w", "s"],
  elbow: ["e", "d"],
};

export function defaultBindings(guidedJoints: string[], stepDeg = 2.0): Binding[] {
  const bindings: Binding[] = [];
  for (const joint of guidedJoints) {
    const row = KEY_ROWS[joint];
    if (!row) {
      continue;
    }
    bindings.push({ key: row[0], joint, delta: +stepDeg });
    bindings.push({ key: row[1], joint, delta: -stepDeg });
  }
  return bindings;
}

export class AdjustInput {
  private readonly byKey = new Map<string, Binding>();
  private readonly held = new Map<string, number>(); // key -> next repeat ms

  constructor(
    bindings: Binding[],
    private readonly emit: (frame: AdjustFrame) => boolean,
    private readonly repeatMs = 150,
  ) {
    for (const binding of bindings) {
      this.byKey.set(binding.key, binding);
    }
  }

  /** Key press; returns true when an adjustment frame was emitted. */
  keyDown(key: string, nowMs: number): boolean {
    const binding = this.byKey.get(key.toLowerCase());
    if (!binding) {
      return false;
    }
    if (this.held.has(key.toLowerCase())) {
      return false; // auto-repeat of the physical key: the timer owns cadence
    }
    this.held.set(key.toLowerCase(), nowMs + this.repeatMs);
    return this.emit(adjustFrame({ [binding.joint]: binding.delta }));
  }

  keyUp(key: string): void {
    this.held.delete(key.toLowerCase());
  }

  /** Hold-to-repeat pump; call from the render loop. */
  tick(nowMs: number): number {
    let emitted = 0;
    for (const [key, nextAt] of this.held) {
      if (nowMs >= nextAt) {
        const binding = this.byKey.get(key)!;
        if (this.emit(adjustFrame({ [binding.joint]: binding.delta }))) {
          emitted += 1;
        }
        this.held.set(key, nowMs + this.repeatMs);
      }
    }
    return emitted;
  }

  /** Direct slider/button adjustment for one guided joint. */
  slider(joint: string, delta: number): boolean {
    const known = [...this.byKey.values()].some((b) => b.joint === joint);
    if (!known) {
      return false;
    }
    return this.emit(adjustFrame({ [joint]: delta }));
  }

  releaseAll(): void {
    this.held.clear();
  }
}
