// Integration tests against a live `impactlab serve` instance (the acceptance
// loop for the authoring UI): load -> PATCH translation -> POST predict ->
// GET keyframes, stale-revision conflict handling, and the guarantee that
// displayed physics equals the solution file on disk.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { createServer } from "node:net";
import { AuthoringClient, InvalidTransformError, StaleRevisionError } from "./client";
import { UiScene, editPair, loadScene, runPrediction } from "./state";
import type { SolutionDoc } from "./types";

const FIXTURES = new URL("../test-fixtures/", import.meta.url);
const solutionFile = JSON.parse(
  readFileSync(new URL("solution.json", FIXTURES), "utf-8"),
) as SolutionDoc;

let service: ChildProcess;
let baseUrl: string;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

beforeAll(async () => {
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  const scenePath = new URL("scene.json", FIXTURES).pathname;
  service = spawn(
    "python3",
    ["-m", "impactlab", "serve", "--port", String(port), "--scene", scenePath],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  const stderr: string[] = [];
  service.stderr?.on("data", (chunk) => stderr.push(String(chunk)));
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const r = await fetch(`${baseUrl}/scene`);
      if (r.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up: ${stderr.join("")}`);
    }
    await new Promise((r) => setTimeout(r, 250));
  }
}, 40_000);

afterAll(() => {
  service?.kill();
});

describe("authoring loop against a live service", () => {
  it("loads the scene and displays the solution file's physics", async () => {
    const client = new AuthoringClient(baseUrl);
    const ui = new UiScene();
    await loadScene(client, ui);
    expect(ui.scene).not.toBeNull();
    expect(ui.revision).toBeGreaterThanOrEqual(1);
    for (const index of [0, 1]) {
      const summary = ui.pairSummary(index);
      expect(summary.massRatio).toBe(solutionFile.mass_ratio);
      expect(summary.restitution).toBe(solutionFile.restitution);
    }
  });

  it("runs the edit -> predict -> keyframes loop", async () => {
    const client = new AuthoringClient(baseUrl);
    const ui = new UiScene();
    await loadScene(client, ui);

    const outcome = await editPair(client, ui, 1, { translation: [2.5, 0, 0.5] });
    expect(outcome).toBe("applied");
    expect(ui.scene!.pairs[1].translation).toEqual([2.5, 0, 0.5]);
    const revAfterEdit = ui.revision;

    await runPrediction(client, ui);
    expect(ui.keyframes).not.toBeNull();
    expect(ui.keyframesRevision).toBe(revAfterEdit);
    expect(ui.predictionStale).toBe(false);

    const kf = await client.getKeyframes();
    expect(kf.base_revision).toBe(revAfterEdit);
    expect(kf.keyframes.bodies.length).toBe(4);
    expect(kf.keyframes).toEqual(ui.keyframes);
    // scrubbing has per-frame samples for every body
    for (const track of kf.keyframes.bodies) {
      expect(track.keys.length).toBe(kf.keyframes.duration + 1);
    }
  });

  it("handles a stale-revision PATCH with a clean refetch", async () => {
    const client = new AuthoringClient(baseUrl);
    const uiA = new UiScene();
    const uiB = new UiScene();
    await loadScene(client, uiA);
    await loadScene(client, uiB);

    expect(await editPair(client, uiA, 0, { time_offset: 4.0 })).toBe("applied");
    // B still quotes the old revision: the raw client call must 409 ...
    await expect(
      client.patchPair(0, { time_offset: 9.0 }, uiB.revision),
    ).rejects.toBeInstanceOf(StaleRevisionError);
    // ... and the UI-level edit refetches without replaying its edit
    expect(await editPair(client, uiB, 0, { time_offset: 9.0 })).toBe("refetched");
    expect(uiB.revision).toBe(uiA.revision);
    expect(uiB.scene!.pairs[0].time_offset).toBe(4.0);
  });

  it("refuses off-axis rotations with 400", async () => {
    const client = new AuthoringClient(baseUrl);
    const ui = new UiScene();
    await loadScene(client, ui);
    await expect(
      client.patchPair(
        0,
        { rotation_about_gravity: 0.4, rotation_axis: [1, 0, 0] },
        ui.revision,
      ),
    ).rejects.toBeInstanceOf(InvalidTransformError);
  });

  it("applies auto-time through the service", async () => {
    const client = new AuthoringClient(baseUrl);
    const ui = new UiScene();
    await loadScene(client, ui);
    const result = await client.autoTime(0, 1, ui.revision);
    expect(Number.isFinite(result.offset)).toBe(true);
    await loadScene(client, ui);
    expect(ui.scene!.pairs[1].time_offset).toBeCloseTo(result.time_offset, 12);
  });
});
