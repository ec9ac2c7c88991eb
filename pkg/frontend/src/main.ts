// Authoring loop wiring: load scene, select and drag pairs on the ground
// plane (translation stays gravity-constrained by construction; the rotation
// control only exposes the gravity axis), edit or auto-compute time offsets,
// run prediction, scrub the keyframe playback.

import { AuthoringClient } from "./client";
import { editPair, loadScene, runPrediction, UiScene } from "./state";
import { Viewer } from "./viewer";
import type { Vec3 } from "./types";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8321";

const client = new AuthoringClient(SERVICE_URL);
const ui = new UiScene();

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const viewer = new Viewer(canvas);
const pairList = document.getElementById("pairs") as HTMLDivElement;
const timeline = document.getElementById("timeline") as HTMLInputElement;
const frameLabel = document.getElementById("frame-label") as HTMLSpanElement;
const statusLine = document.getElementById("status") as HTMLDivElement;
const rotationInput = document.getElementById("rotation") as HTMLInputElement;
const offsetInput = document.getElementById("time-offset") as HTMLInputElement;
const eventList = document.getElementById("events") as HTMLDivElement;

function status(text: string): void {
  statusLine.textContent = text;
}

function fmt(value: number | null, digits = 3): string {
  return value === null ? "n/a" : value.toFixed(digits);
}

function renderPanels(): void {
  if (!ui.scene) return;
  pairList.replaceChildren(
    ...ui.scene.pairs.map((pair, i) => {
      const summary = ui.pairSummary(i);
      const row = document.createElement("button");
      row.className = "pair-row" + (ui.selectedPair === i ? " selected" : "");
      row.textContent =
        `pair ${i}  m_ba ${fmt(summary.massRatio)}  c ${fmt(summary.restitution)}` +
        `  Δt ${summary.timeOffset.toFixed(2)}f` +
        (summary.flagged ? "  ⚠" : "");
      row.onclick = () => {
        ui.selectedPair = i;
        rotationInput.value = String(pair.rotation_about_gravity);
        offsetInput.value = String(pair.time_offset);
        renderAll();
      };
      return row;
    }),
  );
  const max = ui.keyframes?.duration ?? ui.scene.duration;
  timeline.max = String(max);
  frameLabel.textContent = `${ui.playbackFrame.toFixed(1)} / ${max}`;
  eventList.replaceChildren(
    ...ui.eventFrames().map((frame) => {
      const chip = document.createElement("button");
      chip.className = "event-chip";
      chip.textContent = `event @ ${frame}`;
      chip.onclick = () => {
        ui.playbackFrame = ui.clampFrame(frame);
        timeline.value = String(ui.playbackFrame);
        renderAll();
      };
      return chip;
    }),
  );
  if (ui.predictionStale) status("scene edited since last prediction — press predict");
}

function renderAll(): void {
  renderPanels();
  viewer.rebuild(ui);
}

async function guarded(action: () => Promise<void>): Promise<void> {
  try {
    await action();
    renderAll();
  } catch (err) {
    status(String(err));
  }
}

// -- pointer-drag translation on the ground plane -------------------------------

let dragStart: { point: Vec3; translation: Vec3 } | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  if (ui.selectedPair === null || !ui.scene) return;
  const pair = ui.scene.pairs[ui.selectedPair];
  const rect = canvas.getBoundingClientRect();
  const ndcX = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
  const ndcY = -(((ev.clientY - rect.top) / rect.height) * 2 - 1);
  const point = viewer.groundPoint(ndcX, ndcY, pair.translation[1]);
  if (point) dragStart = { point, translation: [...pair.translation] as Vec3 };
});

canvas.addEventListener("pointerup", (ev) => {
  if (!dragStart || ui.selectedPair === null || !ui.scene) return;
  const pair = ui.scene.pairs[ui.selectedPair];
  const rect = canvas.getBoundingClientRect();
  const ndcX = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
  const ndcY = -(((ev.clientY - rect.top) / rect.height) * 2 - 1);
  const point = viewer.groundPoint(ndcX, ndcY, pair.translation[1]);
  const start = dragStart;
  dragStart = null;
  if (!point) return;
  // translation-only patch: motion is confined to the plane normal to gravity
  const next: Vec3 = [
    start.translation[0] + (point[0] - start.point[0]),
    start.translation[1],
    start.translation[2] + (point[2] - start.point[2]),
  ];
  void guarded(async () => {
    const outcome = await editPair(client, ui, ui.selectedPair!, { translation: next });
    status(outcome === "applied" ? "translation applied" : "stale revision — scene refetched");
  });
});

// -- control bindings -----------------------------------------------------------

rotationInput.addEventListener("change", () => {
  if (ui.selectedPair === null) return;
  void guarded(async () => {
    const outcome = await editPair(client, ui, ui.selectedPair!, {
      rotation_about_gravity: Number(rotationInput.value),
      rotation_axis: [0, 1, 0], // the only axis this UI can request
    });
    status(outcome === "applied" ? "rotation applied" : "stale revision — scene refetched");
  });
});

offsetInput.addEventListener("change", () => {
  if (ui.selectedPair === null) return;
  void guarded(async () => {
    const outcome = await editPair(client, ui, ui.selectedPair!, {
      time_offset: Number(offsetInput.value),
    });
    status(outcome === "applied" ? "time offset applied" : "stale revision — scene refetched");
  });
});

(document.getElementById("auto-time") as HTMLButtonElement).onclick = () => {
  if (ui.selectedPair === null || !ui.scene || ui.scene.pairs.length < 2) {
    status("select the late pair (another pair must exist)");
    return;
  }
  const late = ui.selectedPair;
  const early = late === 0 ? 1 : 0;
  void guarded(async () => {
    const result = await client.autoTime(early, late, ui.revision);
    await loadScene(client, ui);
    offsetInput.value = String(result.time_offset);
    status(
      `auto-time: offset ${result.offset.toFixed(2)}f, approach ${result.distance.toFixed(3)} m` +
        (result.within_contact ? "" : " (no coincidence)"),
    );
  });
};

(document.getElementById("predict") as HTMLButtonElement).onclick = () => {
  void guarded(async () => {
    await runPrediction(client, ui);
    status(`prediction done: ${ui.eventFrames().length} secondary event(s)`);
  });
};

timeline.addEventListener("input", () => {
  ui.playbackFrame = ui.clampFrame(Number(timeline.value));
  frameLabel.textContent = `${ui.playbackFrame.toFixed(1)} / ${timeline.max}`;
  viewer.updateFrame(ui);
});

let playing = false;
(document.getElementById("play") as HTMLButtonElement).onclick = () => {
  playing = !playing;
};

function tick(): void {
  if (playing && ui.keyframes) {
    ui.playbackFrame = ui.clampFrame(ui.playbackFrame + 1);
    if (ui.playbackFrame >= ui.keyframes.duration) ui.playbackFrame = 0;
    timeline.value = String(ui.playbackFrame);
    frameLabel.textContent = `${ui.playbackFrame.toFixed(1)} / ${timeline.max}`;
    viewer.updateFrame(ui);
  }
  requestAnimationFrame(tick);
}

function fitCanvas(): void {
  const rect = canvas.parentElement!.getBoundingClientRect();
  viewer.resize(rect.width, rect.height);
  viewer.updateFrame(ui);
}

window.addEventListener("resize", fitCanvas);

void guarded(async () => {
  await loadScene(client, ui);
  await runPrediction(client, ui); // initial playback equals the reconstructions
  fitCanvas();
  status(`scene loaded (revision ${ui.revision})`);
  tick();
});
