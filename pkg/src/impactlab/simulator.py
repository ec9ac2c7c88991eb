"""Forward rigid-body oracle for synthetic evaluation and composed-scene prediction.

Bodies fly on closed-form ballistic arcs (no drag, no damping) and exchange
impulses at collision events. Positions are updated exactly per frame; only
poses are stepped numerically. The world +y axis points along gravity, so the
default gravity vector is (0, +9.81, 0) and "dropping" increases y.

Synthetic scenes script their contact (frame, point, normal) so the ground
truth is exact; oriented-bounding-box detection is used only where contacts
must be discovered (floor bounces, composed-scene prediction).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    BodyState,
    Impulse,
    angular_velocity_from_momentum,
    apply_impulse,
    cuboid_inertia,
    integrate_pose,
    momentum_from_angular_velocity,
    point_velocity,
    quat_normalize,
    quat_to_matrix,
)
from .errors import InsufficientDataError, NoImpulseError
from .observations import BodyObservations, ObservationSet

DEFAULT_GRAVITY = np.array([0.0, 9.81, 0.0])


@dataclass
class ScriptedContact:
    """Known collision of bodies 0 and 1 at a (possibly fractional) frame."""

    frame: float
    x_c: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        self.x_c = np.asarray(self.x_c, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)


@dataclass
class Plane:
    """Static collision plane; the normal points toward the moving body."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)


@dataclass
class SimScene:
    bodies: list[BodyState]
    dims: list[np.ndarray]
    fps: float
    duration: int
    restitution: float
    gravity: np.ndarray = field(default_factory=lambda: DEFAULT_GRAVITY.copy())
    contact: ScriptedContact | None = None
    plane: Plane | None = None

    def __post_init__(self):
        self.dims = [np.asarray(d, dtype=float) for d in self.dims]
        self.gravity = np.asarray(self.gravity, dtype=float)
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")


@dataclass
class SimEvent:
    """One applied impulse: when, where, how strong, and the states around it."""

    t: float
    x_c: np.ndarray
    jn: np.ndarray
    pre: tuple[BodyState, ...]
    post: tuple[BodyState, ...]


@dataclass
class GroundTruth:
    """Per-frame states plus the exact collision event(s) of a simulated scene."""

    fps: float
    duration: int
    dims: list[np.ndarray]
    masses: list[float]
    restitution: float
    p: np.ndarray  # (bodies, frames+1, 3)
    q: np.ndarray  # (bodies, frames+1, 4)
    v: np.ndarray
    k: np.ndarray
    events: list[SimEvent]
    warnings: list[str]

    @property
    def mass_ratio(self) -> float:
        return self.masses[1] / self.masses[0]

    def state(self, body: int, frame: int) -> BodyState:
        return BodyState(
            p=self.p[body, frame],
            q=self.q[body, frame],
            v=self.v[body, frame],
            k=self.k[body, frame],
            mass=self.masses[body],
            inertia0=cuboid_inertia(self.dims[body], self.masses[body]),
        )


def box_support_radius(q: np.ndarray, dims: np.ndarray, direction: np.ndarray) -> float:
    """Extent of an oriented box from its center along a unit direction."""
    rot = quat_to_matrix(np.asarray(q, dtype=float))
    return float(0.5 * np.abs(rot.T @ np.asarray(direction)) @ np.asarray(dims))


def box_support_point(state_p, state_q, dims, direction) -> np.ndarray:
    rot = quat_to_matrix(np.asarray(state_q, dtype=float))
    signs = np.sign(rot.T @ np.asarray(direction))
    return np.asarray(state_p) + rot @ (signs * np.asarray(dims) * 0.5)


def impulse_magnitude(a: BodyState, b: BodyState, n: np.ndarray, x_c: np.ndarray, c: float) -> float:
    """Scalar impulse reproducing restitution c for an approaching contact.

    The normal n points from body b toward body a; approaching means the
    relative contact velocity of a w.r.t. b has a negative component along n.
    Applying the returned j as Impulse(j*n, x_c) leaves the post-collision
    relative normal velocity at -c times its pre-collision value.
    """
    n = np.asarray(n, dtype=float)
    v_rel = point_velocity(a, x_c) - point_velocity(b, x_c)
    vn = float(v_rel @ n)
    if vn >= 0.0:
        raise NoImpulseError(f"contact is separating (relative normal velocity {vn:.3g})")

    denom = 1.0 / a.mass + 1.0 / b.mass
    for body in (a, b):
        r = np.asarray(x_c) - body.p
        ang = angular_velocity_from_momentum(body.q, body.inertia0, np.cross(r, n))
        denom += float(np.cross(ang, r) @ n)
    return -(1.0 + c) * vn / denom


def _ballistic_advance(state: BodyState, gravity: np.ndarray, dt_s: float, pose_substep_s: float) -> BodyState:
    """Exact parabola update for p and v; explicit substeps for the pose."""
    p = state.p + state.v * dt_s + 0.5 * gravity * dt_s * dt_s
    v = state.v + gravity * dt_s
    q = integrate_pose(state.q, state.k, state.inertia0, dt_s, pose_substep_s)
    return replace(state, p=p, q=q, v=v)


def _plane_crossing_time(state: BodyState, dims, plane: Plane, gravity, dt_s: float) -> float | None:
    """Fractional time in [0, dt_s) at which the box support reaches the plane.

    The support radius is frozen at the step's starting pose; exact for
    non-spinning bodies and within one substep of truth otherwise.
    """
    r = box_support_radius(state.q, dims, -plane.normal)
    n = plane.normal
    # signed clearance s(t) = (p(t) - point)·n - r, quadratic in t
    c0 = float((state.p - plane.point) @ n) - r
    c1 = float(state.v @ n)
    c2 = 0.5 * float(gravity @ n)
    if c0 <= 0.0:
        return 0.0 if c1 < 0 else None
    roots = np.roots([c2, c1, c0]) if abs(c2) > 1e-15 else ([-c0 / c1] if c1 != 0 else [])
    hits = [float(t) for t in np.real(np.array(roots)) if np.isreal(t) and -1e-12 <= t < dt_s]
    return min(hits) if hits else None


def simulate(scene: SimScene) -> GroundTruth:
    """Run a scene and record every frame plus exact event states."""
    n_bodies = len(scene.bodies)
    n_frames = scene.duration + 1
    dt_s = 1.0 / scene.fps
    substep_s = dt_s / 4.0
    states = [replace(b) for b in scene.bodies]
    masses = [b.mass for b in scene.bodies]

    p = np.zeros((n_bodies, n_frames, 3))
    q = np.zeros((n_bodies, n_frames, 4))
    v = np.zeros((n_bodies, n_frames, 3))
    k = np.zeros((n_bodies, n_frames, 3))
    events: list[SimEvent] = []
    warnings: list[str] = []

    def record(frame: int):
        for i, s in enumerate(states):
            p[i, frame] = s.p
            q[i, frame] = s.q
            v[i, frame] = s.v
            k[i, frame] = s.k

    record(0)
    min_half_dim = 0.5 * min(float(np.min(d)) for d in scene.dims)

    for frame in range(scene.duration):
        t0 = float(frame)
        remaining = dt_s

        # scripted two-body contact inside this frame
        if (
            scene.contact is not None
            and t0 <= scene.contact.frame < t0 + 1.0
            and n_bodies >= 2
        ):
            tau = (scene.contact.frame - t0) * dt_s
            states = [_ballistic_advance(s, scene.gravity, tau, substep_s) for s in states]
            a, b = states[0], states[1]
            j = impulse_magnitude(a, b, scene.contact.normal, scene.contact.x_c, scene.restitution)
            imp = Impulse(jn=j * scene.contact.normal, x_c=scene.contact.x_c)
            new_a, new_b = apply_impulse(a, b, imp)
            events.append(
                SimEvent(t=scene.contact.frame, x_c=imp.x_c, jn=imp.jn, pre=(a, b), post=(new_a, new_b))
            )
            states = [new_a, new_b] + states[2:]
            remaining -= tau

        # floor-plane bounce of body 0, discovered rather than scripted
        if scene.plane is not None:
            guard = 0
            while remaining > 1e-12:
                tau = _plane_crossing_time(states[0], scene.dims[0], scene.plane, scene.gravity, remaining)
                if tau is None:
                    break
                guard += 1
                if guard > 8:
                    warnings.append(f"frame {frame}: bounce limit reached, clamping")
                    break
                states[0] = _ballistic_advance(states[0], scene.gravity, tau, substep_s)
                pre = states[0]
                x_c = box_support_point(pre.p, pre.q, scene.dims[0], -scene.plane.normal)
                static = BodyState(
                    p=scene.plane.point,
                    q=[1, 0, 0, 0],
                    v=[0, 0, 0],
                    k=[0, 0, 0],
                    mass=math.inf,
                    inertia0=[math.inf, math.inf, math.inf],
                )
                try:
                    j = impulse_magnitude(pre, static, scene.plane.normal, x_c, scene.restitution)
                except NoImpulseError:
                    break
                imp = Impulse(jn=j * scene.plane.normal, x_c=x_c)
                post, _ = apply_impulse(pre, static, imp)
                clearance = float((post.p - scene.plane.point) @ scene.plane.normal) - box_support_radius(
                    post.q, scene.dims[0], -scene.plane.normal
                )
                if clearance < 0.0:  # resting contact: project out instead of creeping in
                    post = replace(post, p=post.p - clearance * scene.plane.normal)
                t_event = t0 + (dt_s - remaining + tau) * scene.fps
                events.append(SimEvent(t=t_event, x_c=x_c, jn=imp.jn, pre=(pre,), post=(post,)))
                states[0] = post
                remaining -= tau

        states = [_ballistic_advance(s, scene.gravity, remaining, substep_s) for s in states]

        if scene.plane is not None:
            clearance = (
                float((states[0].p - scene.plane.point) @ scene.plane.normal)
                - box_support_radius(states[0].q, scene.dims[0], -scene.plane.normal)
            )
            if clearance < -min_half_dim:
                warnings.append(f"frame {frame + 1}: tunneling through plane (depth {-clearance:.3g})")

        record(frame + 1)

    return GroundTruth(
        fps=scene.fps,
        duration=scene.duration,
        dims=list(scene.dims),
        masses=masses,
        restitution=scene.restitution,
        p=p,
        q=q,
        v=v,
        k=k,
        events=events,
        warnings=warnings,
    )


def total_energy(gt: GroundTruth, frame: int, gravity: np.ndarray = DEFAULT_GRAVITY) -> float:
    """Kinetic plus potential energy of all bodies at an integer frame."""
    e = 0.0
    for i in range(len(gt.masses)):
        s = gt.state(i, frame)
        w = angular_velocity_from_momentum(s.q, s.inertia0, s.k)
        e += 0.5 * s.mass * float(s.v @ s.v) + 0.5 * float(w @ s.k)
        e -= s.mass * float(np.asarray(gravity) @ s.p)
    return e


def sample_observations(gt: GroundTruth, interval: int) -> ObservationSet:
    """Regular integer-frame samples walking outward from the first event.

    No sample falls within +-interval of the collision, leaving the gap of
    twice the interval around it; post-collision samples stop at the next
    event (a later bounce) when one exists.
    """
    if interval < 1:
        raise ValueError("interval must be >= 1")
    if not gt.events:
        raise ValueError("ground truth has no collision event to sample around")
    t_c = gt.events[0].t
    # stop post-collision sampling at the next significant event (a later
    # bounce); resting-contact chatter impulses do not count
    j_main = float(np.linalg.norm(gt.events[0].jn))
    post_limit = gt.duration + 0.5
    for ev in gt.events[1:]:
        if float(np.linalg.norm(ev.jn)) >= 0.05 * j_main:
            post_limit = ev.t
            break

    pre_frames = []
    f = math.floor(t_c - interval + 1e-9)
    while f >= 0:
        pre_frames.append(f)
        f -= interval
    post_frames = []
    f = math.ceil(t_c + interval - 1e-9)
    while f <= gt.duration and f < post_limit:
        post_frames.append(f)
        f += interval

    if len(pre_frames) < 2 or len(post_frames) < 2:
        raise InsufficientDataError(
            f"interval {interval} yields {len(pre_frames)} pre / {len(post_frames)} post samples"
        )
    frames = np.array(sorted(pre_frames) + post_frames, dtype=int)

    bodies = []
    for i in range(len(gt.masses)):
        bodies.append(
            BodyObservations(
                name="ab"[i] if i < 2 else f"body{i}",
                dims=gt.dims[i],
                t=frames.astype(float),
                p=gt.p[i, frames].copy(),
                q=gt.q[i, frames].copy(),
            )
        )
    return ObservationSet(bodies=tuple(bodies), fps=gt.fps)


def add_noise(obs: ObservationSet, level: float, seed: int, scale: float | None = None) -> ObservationSet:
    """Uniform per-coordinate annotation noise, deterministic per seed.

    Position coordinates are perturbed by uniform(-level, +level) times the
    annotated body's bounding-box diagonal: misplacing a hand-annotated box
    scales with the object, not with the extent of the flight. Quaternion
    coordinates are perturbed raw and renormalized. Pass an explicit scale
    (meters) to override the per-body convention.
    """
    if level < 0:
        raise ValueError("noise level must be non-negative")
    rng = np.random.default_rng(seed)
    bodies = []
    for body in obs.bodies:
        body_scale = 2.0 * body.half_diagonal if scale is None else float(scale)
        p = body.p + rng.uniform(-level, level, size=body.p.shape) * body_scale
        q = quat_normalize(body.q + rng.uniform(-level, level, size=body.q.shape))
        bodies.append(replace(body, p=p, q=q))
    return ObservationSet(bodies=tuple(bodies), fps=obs.fps)


@dataclass
class Contact:
    x_c: np.ndarray
    normal: np.ndarray
    depth: float


def detect_contact_obb(
    a: BodyState, dims_a: np.ndarray, b: BodyState, dims_b: np.ndarray
) -> Contact | None:
    """Separating-axis test over the 15 oriented-box axes.

    Returns the minimal-penetration axis as the contact normal (pointing from
    b toward a) and the midpoint of the two support points as the contact
    location, or None when a separating axis exists.
    """
    rot_a = quat_to_matrix(a.q)
    rot_b = quat_to_matrix(b.q)
    axes = [rot_a[:, i] for i in range(3)] + [rot_b[:, i] for i in range(3)]
    for i in range(3):
        for jj in range(3):
            cr = np.cross(rot_a[:, i], rot_b[:, jj])
            norm = np.linalg.norm(cr)
            if norm > 1e-9:
                axes.append(cr / norm)

    delta = a.p - b.p
    best_axis = None
    best_overlap = math.inf
    for axis in axes:
        ra = 0.5 * float(np.abs(rot_a.T @ axis) @ dims_a)
        rb = 0.5 * float(np.abs(rot_b.T @ axis) @ dims_b)
        dist = float(delta @ axis)
        overlap = ra + rb - abs(dist)
        if overlap <= 0.0:
            return None
        if overlap < best_overlap:
            best_overlap = overlap
            best_axis = axis if dist >= 0 else -axis

    pa = box_support_point(a.p, a.q, dims_a, -best_axis)
    pb = box_support_point(b.p, b.q, dims_b, best_axis)
    return Contact(x_c=0.5 * (pa + pb), normal=best_axis, depth=best_overlap)


def make_two_body_scene(
    seed: int,
    mass_ratio: float | None = None,
    restitution: float | None = None,
    fps: float = 60.0,
    duration: int = 90,
    collision_frame: float | None = None,
    spin: float = 1.0,
) -> SimScene:
    """Random two-cuboid scene constructed outward from its collision state.

    The collision configuration (touching boxes, approaching velocities,
    modest spins) is drawn first and rewound ballistically to frame 0, so the
    scripted contact is exactly consistent with the initial conditions.
    """
    rng = np.random.default_rng(seed)
    m_ba = float(rng.uniform(0.5, 4.0)) if mass_ratio is None else float(mass_ratio)
    c = float(rng.uniform(0.2, 0.9)) if restitution is None else float(restitution)
    t_c = duration / 2.0 if collision_frame is None else float(collision_frame)

    dims = [rng.uniform(0.18, 0.45, size=3), rng.uniform(0.18, 0.45, size=3)]
    masses = [1.0, m_ba]
    inertias = [cuboid_inertia(dims[i], masses[i]) for i in range(2)]

    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    x_c = rng.uniform(-0.3, 0.3, size=3)
    quats = [quat_normalize(rng.normal(size=4)) for _ in range(2)]
    radii = [box_support_radius(quats[i], dims[i], (n if i == 0 else -n)) for i in range(2)]
    positions = [x_c + n * radii[0], x_c - n * radii[1]]

    # velocities at collision: shared-ish vertical fall plus an approach along n
    approach = rng.uniform(0.9, 2.0, size=2)
    vels = []
    for i in range(2):
        tang = rng.normal(size=3) * 0.6
        tang -= (tang @ n) * n
        normal_speed = -approach[0] if i == 0 else approach[1]
        vel = tang + normal_speed * n
        vel[1] += rng.uniform(2.8, 4.2)
        vels.append(vel)

    spin_scale = float(spin)
    for _ in range(8):
        ks = []
        for i in range(2):
            w = rng.uniform(-1.1, 1.1, size=3) * spin_scale
            ks.append(momentum_from_angular_velocity(quats[i], inertias[i], w))
        pre = [
            BodyState(p=positions[i], q=quats[i], v=vels[i], k=ks[i], mass=masses[i], inertia0=inertias[i])
            for i in range(2)
        ]
        v_rel = point_velocity(pre[0], x_c) - point_velocity(pre[1], x_c)
        if float(v_rel @ n) < -0.4:
            break
        spin_scale *= 0.5  # spins would make the contact graze; calm them down

    # rewind the collision state to frame 0
    t_s = t_c / fps
    g = DEFAULT_GRAVITY
    initial = []
    for s in pre:
        p0 = s.p - s.v * t_s + 0.5 * g * t_s * t_s
        v0 = s.v - g * t_s
        q0 = integrate_pose(s.q, s.k, s.inertia0, -t_s, (1.0 / fps) / 4.0)
        initial.append(replace(s, p=p0, q=q0, v=v0))

    return SimScene(
        bodies=initial,
        dims=dims,
        fps=fps,
        duration=duration,
        restitution=c,
        contact=ScriptedContact(frame=t_c, x_c=x_c, normal=n),
    )


def make_drop_scene(
    restitution: float,
    fps: float = 60.0,
    duration: int = 90,
    bounce_frame: float = 45.0,
    spin: float = 0.0,
) -> SimScene:
    """Single cuboid released from rest, bouncing off a static floor plane.

    Spin is about the gravity axis (a spinning-ball drop): the body lands
    flat on a face instead of tumbling onto a corner, and no energy moves
    between linear and angular motion at the bounce.
    """
    dims = np.array([0.22, 0.22, 0.22])
    inertia = cuboid_inertia(dims, 1.0)
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    w = spin * np.array([0.0, 1.0, 0.0])
    k = momentum_from_angular_velocity(q0, inertia, w)

    t_s = bounce_frame / fps
    fall = 0.5 * 9.81 * t_s * t_s
    support = box_support_radius(q0, dims, np.array([0.0, 1.0, 0.0]))
    p0 = np.array([0.0, 0.0, 0.0])
    floor_y = p0[1] + fall + support

    body = BodyState(p=p0, q=q0, v=[0.0, 0.0, 0.0], k=k, mass=1.0, inertia0=inertia)
    plane = Plane(point=[0.0, floor_y, 0.0], normal=[0.0, -1.0, 0.0])
    return SimScene(
        bodies=[body],
        dims=[dims],
        fps=fps,
        duration=duration,
        restitution=restitution,
        plane=plane,
    )
