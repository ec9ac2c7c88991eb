// Document shapes mirroring the service's JSON formats. Physics numbers are
// always read from these documents, never recomputed client-side.

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // scalar-first [w, x, y, z]

export interface ObservationDoc {
  frame: number;
  p: Vec3;
  q: Quat;
}

export interface AnnotatedBodyDoc {
  name: string;
  dims: Vec3;
  observations: ObservationDoc[];
}

export interface AnnotationDoc {
  version: number;
  fps: number;
  bodies: AnnotatedBodyDoc[];
}

export interface SolutionDoc {
  version: number;
  single_body: boolean;
  fps: number;
  t_c: number;
  restitution: number | null;
  mass_ratio: number | null;
  unknowns: Record<string, number>;
  flags: {
    mass_at_bound: boolean;
    restitution_out_of_range: boolean;
    non_converged: boolean;
  };
  residual_norms: Record<string, number>;
  cost: number;
  observations: AnnotationDoc;
}

export interface PairDoc {
  record: SolutionDoc;
  translation: Vec3;
  rotation_about_gravity: number;
  time_offset: number;
  reference_mass: number;
}

export interface PredictedEventDoc {
  frame: number;
  bodies: [number, number][];
  x_c: Vec3;
  jn: Vec3;
}

export interface SceneDoc {
  version: number;
  duration: number;
  pairs: PairDoc[];
  predicted_events: PredictedEventDoc[];
  revision: number;
}

export interface KeyframeDoc {
  frame: number;
  p: Vec3;
  q: Quat;
}

export interface BodyTrackDoc {
  pair: number;
  body: string;
  keys: KeyframeDoc[];
}

export interface KeyframesDoc {
  version: number;
  fps: number;
  duration: number;
  bodies: BodyTrackDoc[];
  events: PredictedEventDoc[];
}

export interface PairPatch {
  translation?: Vec3;
  rotation_about_gravity?: number;
  rotation_axis?: Vec3;
  time_offset?: number;
  reference_mass?: number;
}

export interface AutoTimeResponse {
  offset: number;
  time_offset: number;
  distance: number;
  within_contact: boolean;
  revision: number;
}

export interface PredictResponse {
  revision: number;
  events: PredictedEventDoc[];
  warnings: string[];
  keyframes: KeyframesDoc;
}

export interface KeyframesResponse {
  revision: number;
  base_revision: number;
  keyframes: KeyframesDoc;
}
