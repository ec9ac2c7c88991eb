// UI scene store. The invariant enforced here: the store never mutates
// physics fields locally — it only applies documents acknowledged by the
// service, so `revision` always equals the last acknowledged revision.

import { AuthoringClient, StaleRevisionError } from "./client";
import type { BodyTrackDoc, KeyframesDoc, PairPatch, Quat, SceneDoc, Vec3 } from "./types";

export interface PairSummary {
  massRatio: number | null;
  restitution: number | null;
  timeOffset: number;
  flagged: boolean;
}

export class UiScene {
  scene: SceneDoc | null = null;
  keyframes: KeyframesDoc | null = null;
  keyframesRevision = 0;
  selectedPair: number | null = null;
  playbackFrame = 0;

  get revision(): number {
    return this.scene?.revision ?? 0;
  }

  applyScene(doc: SceneDoc): void {
    this.scene = doc;
    if (this.selectedPair !== null && this.selectedPair >= doc.pairs.length) {
      this.selectedPair = null;
    }
  }

  applyKeyframes(doc: KeyframesDoc, baseRevision: number): void {
    this.keyframes = doc;
    this.keyframesRevision = baseRevision;
  }

  get predictionStale(): boolean {
    return this.keyframes !== null && this.keyframesRevision !== this.revision;
  }

  pairSummary(index: number): PairSummary {
    if (!this.scene) throw new Error("no scene loaded");
    const pair = this.scene.pairs[index];
    const flags = pair.record.flags;
    return {
      massRatio: pair.record.mass_ratio,
      restitution: pair.record.restitution,
      timeOffset: pair.time_offset,
      flagged: flags.mass_at_bound || flags.restitution_out_of_range || flags.non_converged,
    };
  }

  eventFrames(): number[] {
    return (this.scene?.predicted_events ?? []).map((e) => e.frame);
  }

  clampFrame(frame: number): number {
    const max = this.keyframes?.duration ?? this.scene?.duration ?? 0;
    return Math.min(Math.max(frame, 0), max);
  }
}

export type EditOutcome = "applied" | "refetched";

// Optimistic write with the mandated conflict behavior: on 409 the UI
// refetches the authoritative scene and replays nothing.
export async function editPair(
  client: AuthoringClient,
  ui: UiScene,
  index: number,
  fields: PairPatch,
): Promise<EditOutcome> {
  try {
    ui.applyScene(await client.patchPair(index, fields, ui.revision));
    return "applied";
  } catch (err) {
    if (err instanceof StaleRevisionError) {
      ui.applyScene(await client.getScene());
      return "refetched";
    }
    throw err;
  }
}

export async function loadScene(client: AuthoringClient, ui: UiScene): Promise<void> {
  ui.applyScene(await client.getScene());
}

export async function runPrediction(client: AuthoringClient, ui: UiScene): Promise<void> {
  try {
    const result = await client.predict(ui.revision);
    ui.applyKeyframes(result.keyframes, result.revision);
    ui.applyScene(await client.getScene());
  } catch (err) {
    if (err instanceof StaleRevisionError) {
      ui.applyScene(await client.getScene());
      return runPrediction(client, ui);
    }
    throw err;
  }
}

// -- keyframe interpolation for scrubbing (display only) ----------------------

function lerp3(a: Vec3, b: Vec3, u: number): Vec3 {
  return [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])];
}

export function slerp(a: Quat, b: Quat, u: number): Quat {
  let [bw, bx, by, bz] = b;
  let dot = a[0] * bw + a[1] * bx + a[2] * by + a[3] * bz;
  if (dot < 0) {
    bw = -bw;
    bx = -bx;
    by = -by;
    bz = -bz;
    dot = -dot;
  }
  dot = Math.min(dot, 1);
  if (dot > 1 - 1e-9) {
    const out: Quat = [
      a[0] + u * (bw - a[0]),
      a[1] + u * (bx - a[1]),
      a[2] + u * (by - a[2]),
      a[3] + u * (bz - a[3]),
    ];
    const n = Math.hypot(...out);
    return out.map((v) => v / n) as Quat;
  }
  const theta = Math.acos(dot);
  const s = Math.sin(theta);
  const wa = Math.sin((1 - u) * theta) / s;
  const wb = Math.sin(u * theta) / s;
  return [
    wa * a[0] + wb * bw,
    wa * a[1] + wb * bx,
    wa * a[2] + wb * by,
    wa * a[3] + wb * bz,
  ];
}

export function sampleTrack(track: BodyTrackDoc, frame: number): { p: Vec3; q: Quat } {
  const keys = track.keys;
  if (keys.length === 0) throw new Error("empty track");
  if (frame <= keys[0].frame) return { p: keys[0].p, q: keys[0].q };
  const last = keys[keys.length - 1];
  if (frame >= last.frame) return { p: last.p, q: last.q };
  let lo = 0;
  let hi = keys.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (keys[mid].frame <= frame) lo = mid;
    else hi = mid;
  }
  const a = keys[lo];
  const b = keys[hi];
  const u = (frame - a.frame) / (b.frame - a.frame);
  return { p: lerp3(a.p, b.p, u), q: slerp(a.q, b.q, u) };
}
