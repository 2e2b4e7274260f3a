/**
 * Canvas stick figure: current pose, optional target ghost, device cue
 * markers with opacity proportional to vibration amplitude.
 */

import { CueScheduler, Pulse } from "./cues.js";
import { chainPoints, devicePosition, Point } from "./fk.js";
import type { HelloFrame, StateFrame } from "./protocol.js";

export interface ViewOptions {
  showGhost: boolean;
  scale: number; // px per meter
}

const BODY_COLOR = "#1d3557";
const GHOST_COLOR = "rgba(42, 157, 143, 0.45)";
const CUE_COLOR = "231, 111, 81"; // rgb triplet, alpha applied per pulse
const GROUND_COLOR = "#888";

export class FigureRenderer {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly hello: HelloFrame,
    private readonly options: ViewOptions = { showGhost: false, scale: 220 },
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2d context unavailable");
    }
    this.ctx = ctx;
  }

  setGhost(show: boolean): void {
    this.options.showGhost = show;
  }

  private toPx(p: Point): [number, number] {
    const originX = this.canvas.width * 0.35;
    const originY = this.canvas.height * 0.92;
    return [originX + p.x * this.options.scale, originY - p.z * this.options.scale];
  }

  draw(state: StateFrame, cues: CueScheduler, tNow: number): void {
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    this.drawGround();
    if (this.options.showGhost && state.q_d) {
      const ghost = chainPoints(this.hello.model, state.q_d);
      this.drawChain(ghost, GHOST_COLOR, 5);
    }
    const points = chainPoints(this.hello.model, state.q_c);
    this.drawChain(points, BODY_COLOR, 7);
    this.drawCues(points, cues.activeAt(tNow));
  }

  private drawGround(): void {
    const { ctx } = this;
    const [x0, y] = this.toPx({ x: this.hello.model.foot.heel_offset, z: 0 });
    const [x1] = this.toPx({ x: this.hello.model.foot.toe_offset, z: 0 });
    ctx.strokeStyle = GROUND_COLOR;
    ctx.lineWidth = 4;
    ctx.beginPath();
    ctx.moveTo(x0, y + 6);
    ctx.lineTo(x1, y + 6);
    ctx.stroke();
  }

  private drawChain(points: Point[], color: string, width: number): void {
    const { ctx } = this;
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.lineCap = "round";
    ctx.beginPath();
    const [x0, y0] = this.toPx(points[0]);
    ctx.moveTo(x0, y0);
    for (const p of points.slice(1)) {
      const [x, y] = this.toPx(p);
      ctx.lineTo(x, y);
    }
    ctx.stroke();
    // head above the shoulder point
    const [hx, hy] = this.toPx(points[3]);
    ctx.beginPath();
    ctx.arc(hx, hy - 18, 12, 0, 2 * Math.PI);
    ctx.stroke();
  }

  private drawCues(points: Point[], pulses: Pulse[]): void {
    const { ctx } = this;
    const byId = new Map(this.hello.placements.map((p) => [p.device_id, p]));
    for (const pulse of pulses) {
      const placement = byId.get(pulse.deviceId);
      if (!placement) {
        continue;
      }
      const [x, y] = this.toPx(devicePosition(placement, points));
      ctx.fillStyle = `rgba(${CUE_COLOR}, ${CueScheduler.opacity(pulse)})`;
      ctx.beginPath();
      ctx.arc(x, y, 10, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

/** Short audio click per pulse; silently disabled without WebAudio. */
export class ClickPlayer {
  private ctx: AudioContext | null = null;

  constructor(private enabled = false) {}

  setEnabled(on: boolean): void {
    this.enabled = on;
  }

  play(pulse: Pulse): void {
    if (!this.enabled || typeof AudioContext === "undefined") {
      return;
    }
    this.ctx = this.ctx ?? new AudioContext();
    const osc = this.ctx.createOscillator();
    const gain = this.ctx.createGain();
    osc.frequency.value = 880;
    gain.gain.value = 0.05 * pulse.lam;
    osc.connect(gain).connect(this.ctx.destination);
    osc.start();
    osc.stop(this.ctx.currentTime + 0.03);
  }
}
