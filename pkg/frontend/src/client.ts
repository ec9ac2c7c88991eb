// Typed client for the authoring service. Every write quotes the revision it
// was computed against; a 409 surfaces as StaleRevisionError so the caller
// can refetch and replay nothing.

import type {
  AutoTimeResponse,
  KeyframesResponse,
  PairPatch,
  PredictResponse,
  SceneDoc,
} from "./types";

export class StaleRevisionError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "StaleRevisionError";
  }
}

export class InvalidTransformError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "InvalidTransformError";
  }
}

export class ServiceError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ServiceError";
  }
}

async function raiseFor(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  if (response.status === 409) throw new StaleRevisionError(detail);
  if (response.status === 400) throw new InvalidTransformError(detail);
  throw new ServiceError(response.status, detail);
}

export class AuthoringClient {
  constructor(private readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async getScene(): Promise<SceneDoc> {
    const r = await fetch(this.url("/scene"));
    if (!r.ok) await raiseFor(r);
    return (await r.json()) as SceneDoc;
  }

  async patchPair(index: number, fields: PairPatch, revision: number): Promise<SceneDoc> {
    const r = await fetch(this.url(`/pairs/${index}`), {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ revision, ...fields }),
    });
    if (!r.ok) await raiseFor(r);
    return (await r.json()) as SceneDoc;
  }

  async autoTime(
    pairEarly: number,
    pairLate: number,
    revision: number,
    bodyEarly = 0,
    bodyLate = 0,
  ): Promise<AutoTimeResponse> {
    const r = await fetch(this.url("/auto-time"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        revision,
        pair_early: pairEarly,
        pair_late: pairLate,
        body_early: bodyEarly,
        body_late: bodyLate,
      }),
    });
    if (!r.ok) await raiseFor(r);
    return (await r.json()) as AutoTimeResponse;
  }

  async predict(revision: number): Promise<PredictResponse> {
    const r = await fetch(this.url("/predict"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ revision }),
    });
    if (!r.ok) await raiseFor(r);
    return (await r.json()) as PredictResponse;
  }

  async getKeyframes(): Promise<KeyframesResponse> {
    const r = await fetch(this.url("/keyframes"));
    if (!r.ok) await raiseFor(r);
    return (await r.json()) as KeyframesResponse;
  }
}
