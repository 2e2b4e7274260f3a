import { describe, expect, it } from "vitest";

import { CueScheduler } from "../src/cues.js";
import type { CommandRecord, StateFrame } from "../src/protocol.js";

function stateFrame(tick: number, t: number, commands: CommandRecord[]): StateFrame {
  return {
    type: "state",
    tick,
    t,
    trial_active: true,
    q_c: [0, 0, 0, 0, 0],
    q_d: null,
    eps: null,
    commands,
    tau_overload: null,
  };
}

const cmd = (device_id: string, lambda: number, onset_ms = 0, level = "l3"): CommandRecord => ({
  device_id,
  level,
  lambda,
  duration_ms: 400,
  onset_ms,
});

describe("CueScheduler", () => {
  it("creates exactly one pulse per command", () => {
    const cues = new CueScheduler();
    const created = cues.ingest(stateFrame(0, 0, [cmd("torso_front", 1.0)]));
    expect(created).toHaveLength(1);
    expect(cues.activeAt(0.2)).toHaveLength(1);
  });

  it("ignores a re-ingested tick", () => {
    const cues = new CueScheduler();
    const frame = stateFrame(4, 0.4, [cmd("torso_front", 1.0)]);
    expect(cues.ingest(frame)).toHaveLength(1);
    expect(cues.ingest(frame)).toHaveLength(0);
    expect(cues.activeAt(0.5)).toHaveLength(1);
  });

  it("renders nothing for OFF commands", () => {
    const cues = new CueScheduler();
    const off: CommandRecord = {
      device_id: "torso_front",
      level: "off",
      lambda: 0,
      duration_ms: 0,
      onset_ms: 0,
    };
    expect(cues.ingest(stateFrame(0, 0, [off]))).toHaveLength(0);
    expect(cues.activeAt(0)).toHaveLength(0);
  });

  it("staggers pattern pulses by onset", () => {
    const cues = new CueScheduler();
    cues.ingest(
      stateFrame(0, 1.0, [
        cmd("torso_p1", 0.66, 0, "l2"),
        cmd("torso_p2", 0.66, 400, "l2"),
        cmd("torso_p3", 0.66, 800, "l2"),
      ]),
    );
    expect(cues.activeAt(1.1).map((p) => p.deviceId)).toEqual(["torso_p1"]);
    expect(cues.activeAt(1.5).map((p) => p.deviceId)).toEqual(["torso_p2"]);
    expect(cues.activeAt(1.9).map((p) => p.deviceId)).toEqual(["torso_p3"]);
    expect(cues.activeAt(2.3)).toHaveLength(0);
  });

  it("expires pulses after their duration", () => {
    const cues = new CueScheduler();
    cues.ingest(stateFrame(0, 0, [cmd("torso_front", 0.33, 0, "l1")]));
    expect(cues.activeAt(0.39)).toHaveLength(1);
    expect(cues.activeAt(0.41)).toHaveLength(0);
  });

  it("maps amplitude to opacity", () => {
    const cues = new CueScheduler();
    const [pulse] = cues.ingest(stateFrame(0, 0, [cmd("torso_front", 0.66, 0, "l2")]));
    expect(CueScheduler.opacity(pulse)).toBeCloseTo(0.66, 12);
  });
});
