"""Author new multi-collision scenes from reconstructed collision records.

Placed pairs keep their reconstructed physics untouched: the allowed edits
are rigid translation, rotation about the gravity axis (which folds into the
per-segment beta_y0 angles exactly, preserving the gauge), a time offset, and
an absolute reference mass fixing the pair's relative-mass scale. Prediction
plays every body along its reconstructed trajectory (extrapolating the
ballistic segments is exactly what a forward simulator would do) until a
cross-pair contact is detected, after which the contacted bodies hand over to
impulse-based forward simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    BodyState,
    Impulse,
    apply_impulse,
    cuboid_inertia,
    integrate_pose,
    integrate_pose_checkpoints,
    quat_from_axis_angle,
    quat_multiply,
)
from .errors import InvalidTransformError, NoImpulseError
from .residuals import SEGMENTS
from .simulator import DEFAULT_GRAVITY, detect_contact_obb, impulse_magnitude
from .solver import SolutionRecord
from .trajectory import eval_parabola, eval_velocity

GRAVITY_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass
class PlacedPair:
    """A reconstructed two-body collision placed into a composed scene."""

    record: SolutionRecord
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation_about_gravity: float = 0.0
    time_offset: float = 0.0
    reference_mass: float = 1.0

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float)
        if self.record.single_body:
            raise ValueError("composition expects two-body records")
        if not self.reference_mass > 0:
            raise ValueError("reference_mass must be positive")

    @property
    def event_frame(self) -> float:
        """World frame of this pair's reconstructed collision."""
        return self.record.t_c + self.time_offset

    def frame_range(self) -> tuple[float, float]:
        ts = np.concatenate([b.t for b in self.record.obs.bodies])
        return float(ts.min() + self.time_offset), float(ts.max() + self.time_offset)

    def _rotation(self) -> np.ndarray:
        c, s = math.cos(self.rotation_about_gravity), math.sin(self.rotation_about_gravity)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    def mass(self, body: int) -> float:
        rel = 1.0 if body == 0 else self.record.mass_ratio
        return self.reference_mass * rel

    def segment(self, body: int, world_frame: float):
        decoded = self.record.decode()
        tau = world_frame - self.event_frame
        name = SEGMENTS[2 * body + (0 if tau <= 0 else 1)]
        return decoded, decoded.segments[name], tau

    def body_state(self, body: int, world_frame: float, substep: float = 0.25) -> BodyState:
        """Transformed rigid-body state of one body at a world frame."""
        decoded, seg, tau = self.segment(body, world_frame)
        rot = self._rotation()
        name = SEGMENTS[2 * body + (0 if tau <= 0 else 1)]
        mass = self.mass(body)
        dims = self.record.obs.bodies[body].dims
        inertia_rel = cuboid_inertia(dims, 1.0 if body == 0 else self.record.mass_ratio)
        q_local = integrate_pose(
            decoded.q_c[body], decoded.momenta[name] / self.record.fps, inertia_rel, tau, substep
        )
        spin = quat_from_axis_angle(GRAVITY_AXIS, self.rotation_about_gravity)
        return BodyState(
            p=rot @ eval_parabola(decoded.gauge, seg, tau) + self.translation,
            q=quat_multiply(spin, q_local),
            v=rot @ eval_velocity(decoded.gauge, seg, tau),
            k=self.reference_mass * (rot @ decoded.momenta[name]),
            mass=mass,
            inertia0=cuboid_inertia(dims, mass),
        )


def place_pair(
    record: SolutionRecord,
    translation=(0.0, 0.0, 0.0),
    rotation: float = 0.0,
    time_offset: float = 0.0,
    reference_mass: float = 1.0,
    axis=None,
) -> PlacedPair:
    """Place a record in the world; only gravity-axis rotations are allowed."""
    if axis is not None:
        a = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(a)
        if norm == 0 or np.linalg.norm(np.cross(a / norm, GRAVITY_AXIS)) > 1e-9:
            raise InvalidTransformError(
                "placement rotations must be about the gravity axis (world y)"
            )
    return PlacedPair(
        record=record,
        translation=np.asarray(translation, dtype=float),
        rotation_about_gravity=float(rotation),
        time_offset=float(time_offset),
        reference_mass=float(reference_mass),
    )


@dataclass
class PredictedEvent:
    frame: int
    bodies: tuple[tuple[int, int], tuple[int, int]]  # (pair index, body index)
    x_c: np.ndarray
    jn: np.ndarray


@dataclass
class SceneComposition:
    """Placed pairs plus (after prediction) secondary events and playback."""

    pairs: list[PlacedPair]
    duration: int | None = None
    predicted_events: list[PredictedEvent] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    playback_p: np.ndarray | None = None  # (n_bodies, frames+1, 3)
    playback_q: np.ndarray | None = None

    def __post_init__(self):
        if self.pairs:
            fps = {p.record.fps for p in self.pairs}
            if len(fps) > 1:
                raise ValueError("all placed records must share one frame rate")
        if self.duration is None:
            self.duration = (
                int(math.ceil(max(p.frame_range()[1] for p in self.pairs))) if self.pairs else 0
            )

    @property
    def fps(self) -> float:
        return self.pairs[0].record.fps if self.pairs else 60.0

    def body_list(self) -> list[tuple[int, int]]:
        return [(i, b) for i in range(len(self.pairs)) for b in (0, 1)]


@dataclass
class AutoTimeResult:
    offset: float
    distance: float
    within_contact: bool


def _segment_window(pair: PlacedPair, body: int, side: str) -> tuple[float, float]:
    ts = pair.record.obs.bodies[body].t + pair.time_offset
    ev = pair.event_frame
    if side == "pre":
        return float(ts.min()), ev
    return ev, float(ts.max())


def _position_on(pair: PlacedPair, body: int, frames: np.ndarray) -> np.ndarray:
    """World positions of one body at several frames, vectorized."""
    decoded = pair.record.decode()
    rot = pair._rotation()
    taus = np.asarray(frames, dtype=float) - pair.event_frame
    pre = eval_parabola(decoded.gauge, decoded.segments[SEGMENTS[2 * body]], taus)
    post = eval_parabola(decoded.gauge, decoded.segments[SEGMENTS[2 * body + 1]], taus)
    local = np.where(taus[:, None] <= 0, pre, post)
    return local @ rot.T + pair.translation


def auto_time(
    pair_early: PlacedPair,
    pair_late: PlacedPair,
    body_early: int = 0,
    body_late: int = 0,
    resolution: float = 0.25,
) -> AutoTimeResult:
    """Time offset for the late pair that brings its designated body's
    pre-collision parabola to closest approach with the early body's
    post-collision parabola.

    Dense scan of the offset at 0.25-frame resolution with an inner closest-
    approach scan, then a local parabolic refinement of the offset. When the
    best approach still exceeds the bodies' summed half-diagonals the offset
    is returned with a no-coincidence warning flag.
    """
    early_lo, early_hi = _segment_window(pair_early, body_early, "post")
    late_lo, late_hi = _segment_window(pair_late, body_late, "pre")
    if early_hi <= early_lo or late_hi <= late_lo:
        raise ValueError("designated segments have empty frame windows")

    def approach(offset: float) -> float:
        lo = max(early_lo, late_lo + offset)
        hi = min(early_hi, late_hi + offset)
        if hi < lo:
            return math.inf
        frames = np.arange(lo, hi + resolution / 2, resolution)
        p_early = _position_on(pair_early, body_early, frames)
        p_late = _position_on(
            replace(pair_late, time_offset=pair_late.time_offset + offset), body_late, frames
        )
        return float(np.min(np.linalg.norm(p_early - p_late, axis=1)))

    # both windows share the scan grid, so every grid offset is an aligned
    # sliding window over two precomputed position tracks
    early_frames = np.arange(early_lo, early_hi + resolution / 2, resolution)
    late_frames = np.arange(late_lo, late_hi + resolution / 2, resolution)
    p_early = _position_on(pair_early, body_early, early_frames)
    p_late = _position_on(pair_late, body_late, late_frames)
    n_early, n_late = len(early_frames), len(late_frames)
    offsets = []
    distances = []
    for shift in range(-(n_late - 1), n_early):
        lo_e = max(0, shift)
        hi_e = min(n_early, n_late + shift)
        if hi_e <= lo_e:
            continue
        seg_e = p_early[lo_e:hi_e]
        seg_l = p_late[lo_e - shift : hi_e - shift]
        d = seg_e - seg_l
        offsets.append((early_lo + lo_e * resolution) - (late_lo + (lo_e - shift) * resolution))
        distances.append(float(np.sqrt(np.min((d * d).sum(axis=1)))))
    offsets = np.array(offsets)
    distances = np.array(distances)
    i = int(np.argmin(distances))
    best_offset, best_dist = float(offsets[i]), float(distances[i])

    if 0 < i < len(offsets) - 1 and np.isfinite(distances[i - 1 : i + 2]).all():
        d0, d1, d2 = distances[i - 1 : i + 2]
        denom = d0 - 2 * d1 + d2
        if denom > 1e-12:
            shift = 0.5 * (d0 - d2) / denom
            refined = best_offset + shift * resolution
            refined_dist = approach(refined)
            if refined_dist < best_dist:
                best_offset, best_dist = refined, refined_dist

    threshold = sum(
        pair.record.obs.bodies[b].half_diagonal
        for pair, b in ((pair_early, body_early), (pair_late, body_late))
    )
    return AutoTimeResult(offset=best_offset, distance=best_dist, within_contact=best_dist <= threshold)


def predict_secondary(composition: SceneComposition, substep: float = 0.25) -> SceneComposition:
    """Play the composition forward, discovering cross-pair contacts.

    Bodies follow their reconstructed trajectories (which extrapolate
    ballistically beyond the annotated range exactly as a forward simulator
    would integrate them); once both bodies of a potential contact are past
    their own reconstructed events, oriented-box contacts are checked each
    frame and resolved with an impulse whose restitution is the geometric
    mean of the two records' coefficients.
    """
    comp = SceneComposition(
        pairs=list(composition.pairs),
        duration=composition.duration,
    )
    bodies = comp.body_list()
    n = len(bodies)
    frames = comp.duration + 1
    p = np.zeros((n, frames, 3))
    q = np.zeros((n, frames, 4))
    events: list[PredictedEvent] = []
    warnings: list[str] = []
    fps = comp.fps
    dt_s = 1.0 / fps
    substep_s = substep / fps

    # precompute on-record pose tracks from each collision pose outward so the
    # exported frames match direct checkpoint integration exactly
    record_states: list[list[BodyState]] = []
    for pair, body in [(comp.pairs[i], b) for i, b in bodies]:
        decoded = pair.record.decode()
        rot = pair._rotation()
        spin = quat_from_axis_angle(GRAVITY_AXIS, pair.rotation_about_gravity)
        taus = np.arange(frames, dtype=float) - pair.event_frame
        track_q = np.empty((frames, 4))
        dims = pair.record.obs.bodies[body].dims
        inertia_rel = cuboid_inertia(dims, 1.0 if body == 0 else pair.record.mass_ratio)
        for side, mask_side in (("pre", taus <= 0), ("post", taus > 0)):
            name = SEGMENTS[2 * body + (0 if side == "pre" else 1)]
            idx = np.flatnonzero(mask_side)
            order = idx[np.argsort(np.abs(taus[idx]), kind="stable")]
            snaps = integrate_pose_checkpoints(
                decoded.q_c[body], decoded.momenta[name] / fps, inertia_rel, taus[order], substep
            )
            for j, frame_idx in enumerate(order):
                track_q[frame_idx] = quat_multiply(spin, snaps[j])
        states = []
        for f in range(frames):
            name = SEGMENTS[2 * body + (0 if taus[f] <= 0 else 1)]
            mass = pair.mass(body)
            states.append(
                BodyState(
                    p=rot @ eval_parabola(decoded.gauge, decoded.segments[name], taus[f]) + pair.translation,
                    q=track_q[f],
                    v=rot @ eval_velocity(decoded.gauge, decoded.segments[name], taus[f]),
                    k=pair.reference_mass * (rot @ decoded.momenta[name]),
                    mass=mass,
                    inertia0=cuboid_inertia(dims, mass),
                )
            )
        record_states.append(states)

    simulated: dict[int, BodyState] = {}  # body index -> live simulated state
    touching: set[tuple[int, int]] = set()  # contacts already handled, until they separate
    min_half = 0.5 * min(
        (float(np.min(comp.pairs[i].record.obs.bodies[b].dims)) for i, b in bodies),
        default=math.inf,
    )

    def current_state(slot: int, frame: int) -> BodyState:
        return simulated.get(slot, record_states[slot][frame])

    for f in range(frames):
        for slot in list(simulated):
            s = simulated[slot]
            if f > 0:
                simulated[slot] = replace(
                    s,
                    p=s.p + s.v * dt_s + 0.5 * DEFAULT_GRAVITY * dt_s**2,
                    v=s.v + DEFAULT_GRAVITY * dt_s,
                    q=integrate_pose(s.q, s.k, s.inertia0, dt_s, substep_s),
                )
        for slot, (i, b) in enumerate(bodies):
            s = current_state(slot, f)
            p[slot, f] = s.p
            q[slot, f] = s.q

        # cross-pair contacts among bodies past their own reconstructed event
        for s1 in range(n):
            for s2 in range(s1 + 1, n):
                i1, _ = bodies[s1]
                i2, _ = bodies[s2]
                if i1 == i2:
                    continue
                if f <= comp.pairs[i1].event_frame or f <= comp.pairs[i2].event_frame:
                    continue
                a = current_state(s1, f)
                b_state = current_state(s2, f)
                dims_a = comp.pairs[i1].record.obs.bodies[bodies[s1][1]].dims
                dims_b = comp.pairs[i2].record.obs.bodies[bodies[s2][1]].dims
                hit = detect_contact_obb(a, dims_a, b_state, dims_b)
                if hit is None:
                    touching.discard((s1, s2))
                    continue
                if (s1, s2) in touching:
                    continue  # still overlapping from an earlier handled contact
                touching.add((s1, s2))
                if hit.depth > min_half:
                    warnings.append(f"frame {f}: deep contact (depth {hit.depth:.3g}), possible tunneling")
                c_pair = math.sqrt(
                    max(comp.pairs[i1].record.restitution, 0.0)
                    * max(comp.pairs[i2].record.restitution, 0.0)
                )
                try:
                    j = impulse_magnitude(a, b_state, hit.normal, hit.x_c, min(c_pair, 1.0))
                except NoImpulseError:
                    continue  # already separating; leave them be
                imp = Impulse(jn=j * hit.normal, x_c=hit.x_c)
                new_a, new_b = apply_impulse(a, b_state, imp)
                simulated[s1] = new_a
                simulated[s2] = new_b
                p[s1, f], q[s1, f] = new_a.p, new_a.q
                p[s2, f], q[s2, f] = new_b.p, new_b.q
                events.append(
                    PredictedEvent(frame=f, bodies=(bodies[s1], bodies[s2]), x_c=imp.x_c, jn=imp.jn)
                )

    comp.predicted_events = events
    comp.warnings = warnings
    comp.playback_p = p
    comp.playback_q = q
    return comp


def export_keyframes(composition: SceneComposition, fps: float | None = None) -> dict:
    """Per-body per-frame keyframe document; requires prediction to have run."""
    if composition.playback_p is None:
        raise ValueError("run predict_secondary before exporting keyframes")
    fps = composition.fps if fps is None else float(fps)
    tracks = []
    for slot, (i, b) in enumerate(composition.body_list()):
        tracks.append(
            {
                "pair": i,
                "body": "ab"[b],
                "keys": [
                    {
                        "frame": int(f),
                        "p": [float(v) for v in composition.playback_p[slot, f]],
                        "q": [float(v) for v in composition.playback_q[slot, f]],
                    }
                    for f in range(composition.duration + 1)
                ],
            }
        )
    return {
        "version": 1,
        "fps": fps,
        "duration": composition.duration,
        "bodies": tracks,
        "events": [
            {
                "frame": ev.frame,
                "bodies": [list(bp) for bp in ev.bodies],
                "x_c": [float(v) for v in ev.x_c],
                "jn": [float(v) for v in ev.jn],
            }
            for ev in composition.predicted_events
        ],
    }
