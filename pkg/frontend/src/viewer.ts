// Three.js view: trajectory polylines (from service keyframes, one sample per
// frame), box proxies at the scrub frame, and predicted-event markers. The
// world +y axis points along gravity, so the camera's up vector is -y.

import * as THREE from "three";
import { sampleTrack, UiScene } from "./state";
import type { BodyTrackDoc, Vec3 } from "./types";

const PAIR_COLORS = [0x4ea1ff, 0xffb14e, 0x7dff8a, 0xff6b9e, 0xb48bff, 0x5ef2e0];

export class Viewer {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly renderer: THREE.WebGLRenderer;
  private boxes = new Map<string, THREE.Mesh>();
  private lines: THREE.Line[] = [];
  private markers: THREE.Mesh[] = [];
  private selectionRing: THREE.Mesh;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setClearColor(0x10141c);
    this.camera = new THREE.PerspectiveCamera(50, 1, 0.05, 500);
    this.camera.up.set(0, -1, 0);
    this.camera.position.set(6, -3.5, 7);
    this.camera.lookAt(0, 1.5, 0);

    const grid = new THREE.GridHelper(20, 20, 0x3a4356, 0x242b3a);
    grid.rotation.x = Math.PI; // grid plane normal along -y (visual "up")
    grid.position.y = 4.0;
    this.scene.add(grid);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.65));
    const sun = new THREE.DirectionalLight(0xffffff, 1.1);
    sun.position.set(4, -8, 3);
    this.scene.add(sun);

    const ringGeo = new THREE.TorusGeometry(0.45, 0.02, 8, 48);
    ringGeo.rotateX(Math.PI / 2);
    this.selectionRing = new THREE.Mesh(
      ringGeo,
      new THREE.MeshBasicMaterial({ color: 0xffffff }),
    );
    this.selectionRing.visible = false;
    this.scene.add(this.selectionRing);
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  private trackKey(track: BodyTrackDoc): string {
    return `${track.pair}:${track.body}`;
  }

  rebuild(ui: UiScene): void {
    for (const line of this.lines) this.scene.remove(line);
    for (const marker of this.markers) this.scene.remove(marker);
    for (const box of this.boxes.values()) this.scene.remove(box);
    this.lines = [];
    this.markers = [];
    this.boxes.clear();
    if (!ui.scene) return;

    const tracks = ui.keyframes?.bodies ?? [];
    for (const track of tracks) {
      const color = PAIR_COLORS[track.pair % PAIR_COLORS.length];
      const points = track.keys.map((k) => new THREE.Vector3(...k.p));
      const line = new THREE.Line(
        new THREE.BufferGeometry().setFromPoints(points),
        new THREE.LineBasicMaterial({ color, transparent: true, opacity: 0.75 }),
      );
      this.scene.add(line);
      this.lines.push(line);

      const pair = ui.scene.pairs[track.pair];
      const bodyIndex = track.body === "a" ? 0 : 1;
      const dims = pair.record.observations.bodies[bodyIndex].dims;
      const mesh = new THREE.Mesh(
        new THREE.BoxGeometry(dims[0], dims[1], dims[2]),
        new THREE.MeshStandardMaterial({ color, roughness: 0.55 }),
      );
      this.scene.add(mesh);
      this.boxes.set(this.trackKey(track), mesh);
    }

    for (const ev of ui.scene.predicted_events) {
      const marker = new THREE.Mesh(
        new THREE.SphereGeometry(0.06, 16, 12),
        new THREE.MeshBasicMaterial({ color: 0xff3b3b }),
      );
      marker.position.set(...(ev.x_c as Vec3));
      this.scene.add(marker);
      this.markers.push(marker);
    }
    this.updateFrame(ui);
  }

  updateFrame(ui: UiScene): void {
    const tracks = ui.keyframes?.bodies ?? [];
    for (const track of tracks) {
      const mesh = this.boxes.get(this.trackKey(track));
      if (!mesh) continue;
      const { p, q } = sampleTrack(track, ui.playbackFrame);
      mesh.position.set(...p);
      mesh.quaternion.set(q[1], q[2], q[3], q[0]); // three.js stores xyzw
      if (ui.selectedPair === track.pair && track.body === "a") {
        this.selectionRing.visible = true;
        this.selectionRing.position.set(p[0], p[1], p[2]);
      }
    }
    if (ui.selectedPair === null) this.selectionRing.visible = false;
    this.renderer.render(this.scene, this.camera);
  }

  // ray intersection with the horizontal plane through `height` (world y),
  // used for gravity-constrained dragging
  groundPoint(ndcX: number, ndcY: number, height: number): Vec3 | null {
    const ray = new THREE.Raycaster();
    ray.setFromCamera(new THREE.Vector2(ndcX, ndcY), this.camera);
    const plane = new THREE.Plane(new THREE.Vector3(0, 1, 0), -height);
    const hit = new THREE.Vector3();
    if (!ray.ray.intersectPlane(plane, hit)) return null;
    return [hit.x, hit.y, hit.z];
  }
}
