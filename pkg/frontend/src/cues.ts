/**
 * Turns logged device commands into renderable vibration pulses.
 *
 * Every command of every ingested state frame becomes exactly one pulse
 * (re-ingesting a tick is a no-op, OFF commands render nothing). A pulse is
 * visible from frame time + onset for its duration, with opacity
 * proportional to the commanded amplitude.
 */

import type { StateFrame } from "./protocol.js";

export interface Pulse {
  deviceId: string;
  lam: number;
  level: string;
  startS: number;
  endS: number;
}

export class CueScheduler {
  private pulses: Pulse[] = [];
  private seenTicks = new Set<number>();

  /** Returns the pulses created from this frame (for audio hooks). */
  ingest(frame: StateFrame): Pulse[] {
    if (this.seenTicks.has(frame.tick)) {
      return [];
    }
    this.seenTicks.add(frame.tick);
    const created: Pulse[] = [];
    for (const command of frame.commands) {
      if (command.level === "off" || command.lambda <= 0) {
        continue;
      }
      const start = frame.t + command.onset_ms / 1000;
      created.push({
        deviceId: command.device_id,
        lam: command.lambda,
        level: command.level,
        startS: start,
        endS: start + command.duration_ms / 1000,
      });
    }
    this.pulses.push(...created);
    return created;
  }

  /** Pulses visible at session time t; expired ones are dropped. */
  activeAt(t: number): Pulse[] {
    this.pulses = this.pulses.filter((p) => p.endS > t);
    return this.pulses.filter((p) => p.startS <= t);
  }

  /** Render opacity for a pulse: proportional to amplitude. */
  static opacity(pulse: Pulse): number {
    return Math.max(0, Math.min(1, pulse.lam));
  }

  reset(): void {
    this.pulses = [];
    this.seenTicks.clear();
  }
}
