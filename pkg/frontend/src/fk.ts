/**
 * Planar chain geometry for rendering, mirroring the server's conventions:
 * x forward, z up, ankle at the origin, chain ankle-knee-hip-shoulder-
 * elbow-hand, all angles in degrees with zero = upright and hanging arm.
 */

import type { ModelDef, Placement } from "./protocol.js";

export type Point = { x: number; z: number };

/** rest orientation (ccw from +x) and rotation sign per chain joint */
const REST_DEG = [90, 90, 90, -90, -90];
const SIGNS = [-1, 1, -1, -1, -1];

export function chainPoints(model: ModelDef, anglesDeg: number[]): Point[] {
  if (anglesDeg.length !== model.segments.length) {
    throw new Error(`expected ${model.segments.length} angles`);
  }
  const points: Point[] = [{ x: 0, z: 0 }];
  let cumulative = 0;
  for (let i = 0; i < model.segments.length; i++) {
    cumulative += SIGNS[i] * anglesDeg[i];
    const alpha = ((REST_DEG[i] + cumulative) * Math.PI) / 180;
    const prev = points[points.length - 1];
    const len = model.segments[i].length;
    points.push({
      x: prev.x + len * Math.cos(alpha),
      z: prev.z + len * Math.sin(alpha),
    });
  }
  return points;
}

/** chain segment carrying each guided joint's devices, as point indices */
const DEVICE_SEGMENT: Record<string, [number, number]> = {
  torso: [2, 3], // hip -> shoulder
  shoulder: [3, 4], // shoulder -> elbow
  elbow: [4, 5], // elbow -> hand
};

/**
 * Body-surface anchor of one vibrotactile unit.
 *
 * Paired (front/back) units sit at mid-segment offset to either side;
 * pattern rows run proximal-to-distal spaced by the placement's row spacing.
 */
export function devicePosition(placement: Placement, points: Point[]): Point {
  const seg = DEVICE_SEGMENT[placement.joint];
  if (!seg) {
    throw new Error(`no device anchor for joint ${placement.joint}`);
  }
  const [a, b] = [points[seg[0]], points[seg[1]]];
  const dx = b.x - a.x;
  const dz = b.z - a.z;
  const len = Math.hypot(dx, dz) || 1;
  const ux = dx / len;
  const uz = dz / len;
  // normal pointing toward the wearer's front in the upright pose
  const nx = uz;
  const nz = -ux;
  const id = placement.device_id;
  if (id.endsWith("_front") || id.endsWith("_back")) {
    const side = id.endsWith("_front") ? 1 : -1;
    const mid = 0.55;
    return {
      x: a.x + mid * dx + side * 0.05 * nx,
      z: a.z + mid * dz + side * 0.05 * nz,
    };
  }
  if (id.endsWith("_ramp")) {
    return { x: a.x + 0.55 * dx + 0.05 * nx, z: a.z + 0.55 * dz + 0.05 * nz };
  }
  // pattern row: index 0 proximal, spaced along the segment
  const along = Math.min(0.25 + placement.index * (placement.spacing / len), 0.95);
  return {
    x: a.x + along * dx + 0.05 * nx,
    z: a.z + along * dz + 0.05 * nz,
  };
}
