/**
 * Wire protocol shared with the session server.
 *
 * Every websocket text message carries one JSON record. Outbound frames are
 * built here so the rest of the client never hand-assembles JSON; inbound
 * frames are narrowed with runtime guards because the socket is a trust
 * boundary.
 */

export interface SegmentDef {
  name: string;
  length: number;
  mass: number;
  com_ratio: number;
}

export interface ModelDef {
  schema_version: number;
  gravity: number;
  segments: SegmentDef[];
  joint_limits: Record<string, [number, number]>;
  foot: { heel_offset: number; toe_offset: number };
}

export interface Placement {
  device_id: string;
  joint: string;
  index: number;
  repulsion_sign: number;
  spacing: number;
}

export interface CommandRecord {
  device_id: string;
  level: string;
  lambda: number;
  duration_ms: number;
  onset_ms: number;
}

export interface HelloFrame {
  type: "hello";
  protocol_version: number;
  modality: string;
  model: ModelDef;
  guided_joints: string[];
  joints: string[];
  xi: Record<string, number>;
  dead_band: number;
  tick_s: number;
  placements: Placement[];
}

export interface StateFrame {
  type: "state";
  tick: number;
  t: number;
  trial_active: boolean;
  q_c: number[];
  q_d: number[] | null;
  eps: number[] | null;
  commands: CommandRecord[];
  tau_overload: number[] | null;
}

export interface TrialFrame {
  type: "trial";
  action: string;
  kind?: string;
  status?: string;
  log_path?: string;
  summary?: Record<string, number | null> | null;
}

export interface ScoreFrame {
  type: "score";
  kind: string;
  score: number;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
}

export type ServerFrame = HelloFrame | StateFrame | TrialFrame | ScoreFrame | ErrorFrame;

const SERVER_TYPES = new Set(["hello", "state", "trial", "score", "error"]);

export class ProtocolError extends Error {}

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

export function parseServerFrame(raw: string): ServerFrame {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError("frame is not JSON");
  }
  if (!isObject(data) || typeof data.type !== "string" || !SERVER_TYPES.has(data.type)) {
    throw new ProtocolError("unknown server frame");
  }
  switch (data.type) {
    case "hello":
      if (!isObject(data.model) || !Array.isArray(data.guided_joints)) {
        throw new ProtocolError("malformed hello frame");
      }
      break;
    case "state":
      if (!Array.isArray(data.q_c) || typeof data.tick !== "number") {
        throw new ProtocolError("malformed state frame");
      }
      if (!Array.isArray(data.commands)) {
        throw new ProtocolError("state frame lacks a command list");
      }
      break;
    case "score":
      if (typeof data.score !== "number") {
        throw new ProtocolError("malformed score frame");
      }
      break;
    case "error":
      if (typeof data.reason !== "string") {
        throw new ProtocolError("malformed error frame");
      }
      break;
  }
  return data as unknown as ServerFrame;
}

// -- outbound builders --------------------------------------------------------

export interface AdjustFrame {
  type: "adjust";
  deltas: Record<string, number>;
}

export interface TrialControlFrame {
  type: "trial";
  action: "start" | "complete" | "abort";
  kind?: "modality" | "ergonomic";
  targets?: Record<string, number>;
  condition?: number;
}

export interface QuestionnaireFrame {
  type: "questionnaire";
  kind: "sus" | "seq";
  responses: number[] | number;
}

export type ClientFrame = AdjustFrame | TrialControlFrame | QuestionnaireFrame;

export function adjustFrame(deltas: Record<string, number>): AdjustFrame {
  return { type: "adjust", deltas };
}

export function startModalityTrial(targets: Record<string, number>): TrialControlFrame {
  return { type: "trial", action: "start", kind: "modality", targets };
}

export function startErgonomicTrial(condition: number): TrialControlFrame {
  return { type: "trial", action: "start", kind: "ergonomic", condition };
}

export function completeTrial(): TrialControlFrame {
  return { type: "trial", action: "complete" };
}

export function abortTrial(): TrialControlFrame {
  return { type: "trial", action: "abort" };
}

export function susFrame(responses: number[]): QuestionnaireFrame {
  return { type: "questionnaire", kind: "sus", responses };
}

export function seqFrame(response: number): QuestionnaireFrame {
  return { type: "questionnaire", kind: "seq", responses: response };
}

export function encodeClientFrame(frame: ClientFrame): string {
  return JSON.stringify(frame);
}
