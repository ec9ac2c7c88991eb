"""Least-squares energy terms over the flat unknown vector.

One unknown vector of 48 scalars describes a reconstructed two-body
collision: the shared trajectory gauge, four parabola segments, one offset
and one collision pose per body (shared between that body's segments by
layout construction, never by penalty), four angular momenta, the collision
point, the impulse vector, and the mass ratio. The collision frame t_c is
not an unknown; it is fixed by the solver's segment search.

Angular momentum slots are in per-second units (kg·m²/s in relative mass
units); pose integration over frame offsets divides by fps internally.

Every residual accepts a batch of unknown vectors (leading dimensions) and
is complex-step safe, which is how ``jacobian`` obtains machine-accurate
forward-mode derivatives in a single vectorized evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._integrate import integrate_schedule
from .dynamics import _cross3, cuboid_inertia, quat_rotate, quat_conjugate
from .errors import UndefinedRestitutionError
from .observations import ObservationSet
from .trajectory import GRAVITY_MAGNITUDE, GlobalGauge, Offset, ParabolaParams

SEGMENTS = ("a_pre", "a_post", "b_pre", "b_post")
MASS_RATIO_BOUNDS = (1e-5, 10.0)


class UnknownLayout:
    """Named index map over the 48-slot unknown vector.

    Sharing is structural: each body has exactly one b4 offset and one
    collision pose slot group referenced by both of its segments. The two
    unit-quaternion scale gauges are the reason this counts 48 scalars
    rather than 47 independent degrees of freedom.
    """

    B1 = 0
    BETA_X = 1
    BETA_Y1 = 2
    SIZE = 48

    @staticmethod
    def b2(seg: int) -> int:
        return 3 + 3 * seg

    @staticmethod
    def b3(seg: int) -> int:
        return 4 + 3 * seg

    @staticmethod
    def beta_y0(seg: int) -> int:
        return 5 + 3 * seg

    @staticmethod
    def b4(body: int) -> slice:
        return slice(15 + 3 * body, 18 + 3 * body)

    @staticmethod
    def k(seg: int) -> slice:
        return slice(21 + 3 * seg, 24 + 3 * seg)

    @staticmethod
    def q_c(body: int) -> slice:
        return slice(33 + 4 * body, 37 + 4 * body)

    X_C = slice(41, 44)
    JN = slice(44, 47)
    M_BA = 47

    @classmethod
    def slot_names(cls) -> list[str]:
        names = ["b1", "beta_x", "beta_y1"]
        for seg in SEGMENTS:
            names += [f"b2[{seg}]", f"b3[{seg}]", f"beta_y0[{seg}]"]
        for body in "ab":
            names += [f"b4[{body}].{ax}" for ax in "xyz"]
        for seg in SEGMENTS:
            names += [f"k[{seg}].{ax}" for ax in "xyz"]
        for body in "ab":
            names += [f"q_c[{body}].{comp}" for comp in "wxyz"]
        names += [f"x_c.{ax}" for ax in "xyz"]
        names += [f"jn.{ax}" for ax in "xyz"]
        names.append("m_ba")
        return names

    @classmethod
    def clamp_mass_ratio(cls, x: np.ndarray) -> np.ndarray:
        lo, hi = MASS_RATIO_BOUNDS
        x = x.copy()
        x[..., cls.M_BA] = np.clip(np.real(x[..., cls.M_BA]), lo, hi)
        return x


@dataclass
class Weights:
    """Energy term weights; the momentum/impulse regularizers are soft."""

    w_mom: float = 0.1
    w_imp: float = 0.1
    w_g: float = 1.0
    w_pos: float = 4.0
    w_ori: float = 4.0

    def __post_init__(self):
        for name in ("w_mom", "w_imp", "w_g", "w_pos", "w_ori"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class PhaseMask:
    """Selects which physics terms participate; data terms are always active."""

    momentum: bool = True
    impulse: bool = True
    gravity: bool = True


def _yxy(beta_y0, beta_x, beta_y1) -> np.ndarray:
    """Batched Ry(beta_y0)·Rx(beta_x)·Ry(beta_y1) without trig of matrices."""
    c0, s0 = np.cos(beta_y0), np.sin(beta_y0)
    cx, sx = np.cos(beta_x), np.sin(beta_x)
    c1, s1 = np.cos(beta_y1), np.sin(beta_y1)
    zeros = np.zeros_like(c0 * cx * c1)
    r00 = c0 * c1 - s0 * cx * s1
    r02 = c0 * s1 + s0 * cx * c1
    r10 = sx * s1 + zeros
    r12 = -sx * c1 + zeros
    r20 = -s0 * c1 - c0 * cx * s1
    r22 = -s0 * s1 + c0 * cx * c1
    r01 = s0 * sx + zeros
    r11 = cx + zeros
    r21 = c0 * sx + zeros
    return np.stack(
        [
            np.stack([r00, r01, r02], axis=-1),
            np.stack([r10, r11, r12], axis=-1),
            np.stack([r20, r21, r22], axis=-1),
        ],
        axis=-2,
    )


class _PoseSchedule:
    """Unified substep plan integrating every segment's pose checkpoints at once.

    Built once per problem; running it yields the predicted orientation at
    each observation, batched over unknown vectors and over segments. The
    stepping itself runs in the compiled kernel.
    """

    def __init__(self, offsets_per_seg: list[np.ndarray], obs_slots: list[list[int]], substep: float):
        self.n_seg = len(offsets_per_seg)
        self.n_obs = sum(len(s) for s in obs_slots)
        cursors = [0] * self.n_seg
        done = [0.0] * self.n_seg
        dts: list[np.ndarray] = []
        snap_after: list[int] = []
        snap_seg: list[int] = []
        snap_slot: list[int] = []

        # snapshots due before any stepping (offset 0 observations)
        for s in range(self.n_seg):
            offs = offsets_per_seg[s]
            while cursors[s] < len(offs) and abs(offs[cursors[s]]) <= 1e-12:
                snap_after.append(0)
                snap_seg.append(s)
                snap_slot.append(obs_slots[s][cursors[s]])
                cursors[s] += 1

        while any(c < len(offsets_per_seg[s]) for s, c in enumerate(cursors)):
            step = np.zeros(self.n_seg)
            for s in range(self.n_seg):
                offs = offsets_per_seg[s]
                if cursors[s] >= len(offs):
                    continue
                target = abs(offs[cursors[s]])
                step[s] = np.sign(offs[cursors[s]]) * min(substep, target - done[s])
            dts.append(step)
            for s in range(self.n_seg):
                offs = offsets_per_seg[s]
                if cursors[s] >= len(offs):
                    continue
                done[s] += abs(step[s])
                while cursors[s] < len(offs) and abs(offs[cursors[s]]) <= done[s] + 1e-12:
                    snap_after.append(len(dts))
                    snap_seg.append(s)
                    snap_slot.append(obs_slots[s][cursors[s]])
                    cursors[s] += 1
        self.dts = np.array(dts) if dts else np.zeros((0, self.n_seg))
        self.snap_after = np.array(snap_after, dtype=np.int64)
        self.snap_seg = np.array(snap_seg, dtype=np.int64)
        self.snap_slot = np.array(snap_slot, dtype=np.int64)

    def run(self, q0: np.ndarray, k: np.ndarray, inertia: np.ndarray) -> np.ndarray:
        """q0/k/inertia: (..., n_seg, {4,3,3}); returns (..., n_obs, 4)."""
        lead = q0.shape[:-2]
        n_batch = int(np.prod(lead)) if lead else 1
        dtype = q0.dtype
        q0f = np.ascontiguousarray(q0.reshape(n_batch, self.n_seg, 4))
        kf = np.ascontiguousarray(np.broadcast_to(k, lead + (self.n_seg, 3)).reshape(n_batch, self.n_seg, 3).astype(dtype))
        inf = np.ascontiguousarray(np.broadcast_to(inertia, lead + (self.n_seg, 3)).reshape(n_batch, self.n_seg, 3).astype(dtype))
        out = np.empty((n_batch, self.n_obs, 4), dtype=dtype)
        integrate_schedule(q0f, kf, inf, self.dts, self.snap_after, self.snap_seg, self.snap_slot, out)
        return out.reshape(lead + (self.n_obs, 4))


class CollisionProblem:
    """Residual assembly for a two-body collision at a fixed collision frame."""

    def __init__(
        self,
        obs: ObservationSet,
        t_c: float,
        weights: Weights | None = None,
        mask: PhaseMask | None = None,
        substep: float = 0.25,
    ):
        if len(obs.bodies) != 2:
            raise ValueError("CollisionProblem needs exactly two observed bodies")
        if not 0 < substep <= 0.25:
            raise ValueError("substep must lie in (0, 0.25] frames")
        self.obs = obs
        self.t_c = float(t_c)
        self.weights = weights or Weights()
        self.mask = mask or PhaseMask()
        self.substep = float(substep)
        self.fps = obs.fps
        self.layout = UnknownLayout
        self.inertia_unit = np.stack(
            [cuboid_inertia(obs.bodies[0].dims, 1.0), cuboid_inertia(obs.bodies[1].dims, 1.0)]
        )
        # segment -> observations, in global emission order (body a then b, by time)
        offsets_per_seg: list[list[float]] = [[], [], [], []]
        slots_per_seg: list[list[int]] = [[], [], [], []]
        self._obs_seg = []
        self._obs_tau = []
        slot = 0
        for body_idx, body in enumerate(obs.bodies):
            for t in body.t:
                tau = float(t - self.t_c)
                seg = 2 * body_idx + (0 if tau <= 0 else 1)
                self._obs_seg.append(seg)
                self._obs_tau.append(tau)
                offsets_per_seg[seg].append(tau)
                slots_per_seg[seg].append(slot)
                slot += 1
        self.n_obs = slot
        self._obs_seg = np.array(self._obs_seg)
        self._obs_tau = np.array(self._obs_tau)
        self._obs_p = np.concatenate([b.p for b in obs.bodies], axis=0)
        self._obs_q = np.concatenate([b.q for b in obs.bodies], axis=0)
        self._obs_body = np.repeat([0, 1], [len(b.t) for b in obs.bodies])
        # pre-collision offsets run backward: sort by magnitude (descending times)
        for seg in range(4):
            order = np.argsort(np.abs(np.array(offsets_per_seg[seg])), kind="stable")
            offsets_per_seg[seg] = np.array(offsets_per_seg[seg])[order]
            slots_per_seg[seg] = [slots_per_seg[seg][i] for i in order]
        self._schedule = _PoseSchedule(offsets_per_seg, slots_per_seg, self.substep)

    # -- segment kinematics -------------------------------------------------

    def _segment_rotations(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        beta_y0 = np.stack([x[..., lay.beta_y0(s)] for s in range(4)], axis=-1)
        return _yxy(beta_y0, x[..., lay.BETA_X, None], x[..., lay.BETA_Y1, None])

    def _segment_velocities(self, x: np.ndarray, rot: np.ndarray) -> np.ndarray:
        """Velocity of each segment at the collision frame, in m/s: fps·R·(b3, b2, 0)."""
        lay = self.layout
        b2 = np.stack([x[..., lay.b2(s)] for s in range(4)], axis=-1)
        b3 = np.stack([x[..., lay.b3(s)] for s in range(4)], axis=-1)
        local = np.stack([b3, b2, np.zeros_like(b2)], axis=-1)
        return self.fps * (rot @ local[..., None])[..., 0]

    def _segment_inertia(self, x: np.ndarray) -> np.ndarray:
        """(..., 4, 3) reference inertia per segment; body b scales with m_ba."""
        m = x[..., self.layout.M_BA]
        ia = np.broadcast_to(self.inertia_unit[0], x.shape[:-1] + (3,))
        ib = self.inertia_unit[1] * m[..., None]
        return np.stack([ia, ia, ib, ib], axis=-2).astype(x.dtype)

    # -- individual energy terms --------------------------------------------

    def residual_gravity(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        zeros = np.zeros_like(x[..., lay.BETA_X])
        rot = _yxy(zeros, x[..., lay.BETA_X], x[..., lay.BETA_Y1])
        g_local = np.stack(
            [zeros, x[..., lay.B1] * self.fps**2, zeros], axis=-1
        )
        g_world_y = (rot @ g_local[..., None])[..., 1, 0]
        return (GRAVITY_MAGNITUDE - g_world_y)[..., None]

    def _momentum_terms(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        lay = self.layout
        m = x[..., lay.M_BA, None]
        k = np.stack([x[..., lay.k(s)] for s in range(4)], axis=-2)
        p_a, p_b = x[..., lay.b4(0)], x[..., lay.b4(1)]
        lin = v[..., 0, :] + m * v[..., 2, :] - v[..., 1, :] - m * v[..., 3, :]
        ang_pre = _cross3(p_a, v[..., 0, :]) + k[..., 0, :] + m * _cross3(p_b, v[..., 2, :]) + k[..., 2, :]
        ang_post = _cross3(p_a, v[..., 1, :]) + k[..., 1, :] + m * _cross3(p_b, v[..., 3, :]) + k[..., 3, :]
        return np.concatenate([lin, ang_pre - ang_post], axis=-1)

    def residual_momentum(self, x: np.ndarray) -> np.ndarray:
        rot = self._segment_rotations(x)
        return self._momentum_terms(x, self._segment_velocities(x, rot))

    def _impulse_terms(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        lay = self.layout
        m = x[..., lay.M_BA, None]
        jn = x[..., lay.JN]
        x_c = x[..., lay.X_C]
        k = np.stack([x[..., lay.k(s)] for s in range(4)], axis=-2)
        lin_a = v[..., 1, :] - v[..., 0, :] - jn
        lin_b = v[..., 3, :] - v[..., 2, :] + jn / m
        ang_a = k[..., 1, :] - k[..., 0, :] - _cross3(x_c - x[..., lay.b4(0)], jn)
        ang_b = k[..., 3, :] - k[..., 2, :] + _cross3(x_c - x[..., lay.b4(1)], jn)
        return np.concatenate([lin_a, lin_b, ang_a, ang_b], axis=-1)

    def residual_impulse(self, x: np.ndarray) -> np.ndarray:
        rot = self._segment_rotations(x)
        return self._impulse_terms(x, self._segment_velocities(x, rot))

    def _position_terms(self, x: np.ndarray, rot_all: np.ndarray) -> np.ndarray:
        lay = self.layout
        tau = self._obs_tau
        seg = self._obs_seg
        b1 = x[..., lay.B1, None]
        b2 = np.stack([x[..., lay.b2(s)] for s in range(4)], axis=-1)[..., seg]
        b3 = np.stack([x[..., lay.b3(s)] for s in range(4)], axis=-1)[..., seg]
        local = np.stack(
            [b3 * tau, 0.5 * b1 * tau * tau + b2 * tau, np.zeros_like(b2)], axis=-1
        )
        rot = rot_all[..., seg, :, :]
        b4 = np.stack([x[..., lay.b4(0)], x[..., lay.b4(1)]], axis=-2)[..., self._obs_body, :]
        pred = (rot @ local[..., None])[..., 0] + b4
        return (pred - self._obs_p).reshape(x.shape[:-1] + (3 * self.n_obs,))

    def residual_position(self, x: np.ndarray) -> np.ndarray:
        return self._position_terms(x, self._segment_rotations(x))

    def residual_orientation(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        q_c = np.stack([x[..., lay.q_c(0)], x[..., lay.q_c(1)]], axis=-2)
        q_c = q_c / np.sqrt((q_c * q_c).sum(axis=-1))[..., None]
        q0 = q_c[..., (0, 0, 1, 1), :]
        k = np.stack([x[..., lay.k(s)] for s in range(4)], axis=-2) / self.fps
        inertia = self._segment_inertia(x)
        pred = self._schedule.run(q0.astype(x.dtype), k, inertia)
        sign = np.where((np.real(pred) * self._obs_q).sum(axis=-1) < 0, -1.0, 1.0)
        resid = pred - sign[..., None] * self._obs_q
        return resid.reshape(x.shape[:-1] + (4 * self.n_obs,))

    # -- assembly -------------------------------------------------------------

    def block_slices(self) -> dict[str, slice]:
        blocks: dict[str, slice] = {}
        at = 0
        if self.mask.gravity:
            blocks["gravity"] = slice(at, at + 1)
            at += 1
        if self.mask.momentum:
            blocks["momentum"] = slice(at, at + 6)
            at += 6
        if self.mask.impulse:
            blocks["impulse"] = slice(at, at + 12)
            at += 12
        blocks["position"] = slice(at, at + 3 * self.n_obs)
        at += 3 * self.n_obs
        blocks["orientation"] = slice(at, at + 4 * self.n_obs)
        return blocks

    def assemble(self, x: np.ndarray) -> np.ndarray:
        """√weight-scaled concatenation of the active residual blocks.

        Order: gravity, momentum, impulse, positions (body a's observations
        in time order, then body b's), orientations in the same order.
        """
        x = np.asarray(x)
        w = self.weights
        rot = self._segment_rotations(x)
        parts = []
        if self.mask.gravity:
            parts.append(np.sqrt(w.w_g) * self.residual_gravity(x))
        if self.mask.momentum or self.mask.impulse:
            v = self._segment_velocities(x, rot)
            if self.mask.momentum:
                parts.append(np.sqrt(w.w_mom) * self._momentum_terms(x, v))
            if self.mask.impulse:
                parts.append(np.sqrt(w.w_imp) * self._impulse_terms(x, v))
        parts.append(np.sqrt(w.w_pos) * self._position_terms(x, rot))
        parts.append(np.sqrt(w.w_ori) * self.residual_orientation(x))
        return np.concatenate(parts, axis=-1)

    def cost(self, x: np.ndarray) -> float:
        r = self.assemble(x)
        return 0.5 * float(np.real(r) @ np.real(r))

    def jacobian(self, x: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
        """Forward-mode derivative of assemble via complex-step perturbation.

        One vectorized batch evaluation yields the full Jacobian to machine
        precision (no truncation error, unlike finite differences).
        """
        x = np.asarray(x, dtype=float)
        cols = np.arange(x.size) if cols is None else np.asarray(cols)
        h = 1e-30
        batch = np.repeat(x[None, :], len(cols), axis=0).astype(complex)
        batch[np.arange(len(cols)), cols] += 1j * h
        return (self.assemble(batch).imag / h).T

    # -- derived quantities ----------------------------------------------------

    def compute_restitution(self, x: np.ndarray) -> float:
        """Coefficient of restitution from relative contact-point velocities."""
        x = np.asarray(x, dtype=float)
        lay = self.layout
        jn = x[lay.JN]
        j_mag = float(np.linalg.norm(jn))
        if j_mag <= 1e-12:
            raise UndefinedRestitutionError("impulse magnitude is zero; collision normal undefined")
        n = jn / j_mag
        rot = self._segment_rotations(x)
        v = self._segment_velocities(x, rot)
        k = np.stack([x[lay.k(s)] for s in range(4)], axis=0)
        inertia = self._segment_inertia(x)
        q_c = np.stack([x[lay.q_c(0)], x[lay.q_c(1)]], axis=0)
        q_c = q_c / np.linalg.norm(q_c, axis=-1, keepdims=True)
        b4 = np.stack([x[lay.b4(0)], x[lay.b4(1)]], axis=0)
        v_hat = []
        for seg in range(4):
            body = seg // 2
            k_body = quat_rotate(quat_conjugate(q_c[body]), k[seg])
            w = quat_rotate(q_c[body], k_body / inertia[seg])
            v_hat.append(v[seg] + np.cross(w, x[lay.X_C] - b4[body]))
        denom = float((v_hat[0] - v_hat[2]) @ n)
        if abs(denom) < 1e-9:
            raise UndefinedRestitutionError("zero approach velocity along the collision normal")
        return float((v_hat[3] - v_hat[1]) @ n) / denom

    def decode(self, x: np.ndarray) -> "DecodedUnknowns":
        x = np.asarray(x, dtype=float)
        lay = self.layout
        gauge = GlobalGauge(
            b1=float(x[lay.B1]), beta_x=float(x[lay.BETA_X]), beta_y1=float(x[lay.BETA_Y1]), fps=self.fps
        )
        offsets = [Offset(x[lay.b4(i)].copy()) for i in range(2)]
        segments = {}
        for s, name in enumerate(SEGMENTS):
            segments[name] = ParabolaParams(
                b2=float(x[lay.b2(s)]),
                b3=float(x[lay.b3(s)]),
                beta_y0=float(x[lay.beta_y0(s)]),
                offset=offsets[s // 2],
            )
        q_c = [x[lay.q_c(i)].copy() for i in range(2)]
        q_c = [q / np.linalg.norm(q) for q in q_c]
        return DecodedUnknowns(
            gauge=gauge,
            segments=segments,
            offsets=offsets,
            momenta={name: x[lay.k(s)].copy() for s, name in enumerate(SEGMENTS)},
            q_c=q_c,
            x_c=x[lay.X_C].copy(),
            jn=x[lay.JN].copy(),
            mass_ratio=float(x[lay.M_BA]),
        )


@dataclass
class DecodedUnknowns:
    """Structured view of an unknown vector, for records and authoring."""

    gauge: GlobalGauge
    segments: dict[str, ParabolaParams]
    offsets: list[Offset]
    momenta: dict[str, np.ndarray]
    q_c: list[np.ndarray]
    x_c: np.ndarray
    jn: np.ndarray
    mass_ratio: float


class SingleBodyLayout:
    """26-slot layout for the infinite-mass (static second object) variant."""

    B1 = 0
    BETA_X = 1
    BETA_Y1 = 2
    SIZE = 26

    @staticmethod
    def b2(seg: int) -> int:
        return 3 + 3 * seg

    @staticmethod
    def b3(seg: int) -> int:
        return 4 + 3 * seg

    @staticmethod
    def beta_y0(seg: int) -> int:
        return 5 + 3 * seg

    B4 = slice(9, 12)

    @staticmethod
    def k(seg: int) -> slice:
        return slice(12 + 3 * seg, 15 + 3 * seg)

    Q_C = slice(18, 22)
    X_C = slice(22, 25)
    J = 25


class SingleBodyProblem:
    """Bounce of one body off a static plane: second object's unknowns removed.

    The impulse direction is pinned to the plane normal (a floor bounce fixes
    it physically), leaving a scalar impulse magnitude; momentum-conservation
    terms are dropped since the static object absorbs arbitrary momentum.
    """

    def __init__(
        self,
        obs: ObservationSet,
        t_c: float,
        plane_point: np.ndarray,
        plane_normal: np.ndarray,
        weights: Weights | None = None,
        mask: PhaseMask | None = None,
        substep: float = 0.25,
    ):
        if len(obs.bodies) != 1:
            raise ValueError("SingleBodyProblem needs exactly one observed body")
        self.obs = obs
        self.t_c = float(t_c)
        self.plane_point = np.asarray(plane_point, dtype=float)
        n = np.asarray(plane_normal, dtype=float)
        self.plane_normal = n / np.linalg.norm(n)
        self.weights = weights or Weights()
        self.mask = mask or PhaseMask()
        self.fps = obs.fps
        self.substep = float(substep)
        self.layout = SingleBodyLayout
        self.inertia0 = cuboid_inertia(obs.bodies[0].dims, 1.0)

        offsets_per_seg: list[list[float]] = [[], []]
        slots_per_seg: list[list[int]] = [[], []]
        self._obs_seg = []
        self._obs_tau = []
        for slot, t in enumerate(obs.bodies[0].t):
            tau = float(t - self.t_c)
            seg = 0 if tau <= 0 else 1
            self._obs_seg.append(seg)
            self._obs_tau.append(tau)
            offsets_per_seg[seg].append(tau)
            slots_per_seg[seg].append(slot)
        self.n_obs = len(self._obs_tau)
        self._obs_seg = np.array(self._obs_seg)
        self._obs_tau = np.array(self._obs_tau)
        self._obs_p = obs.bodies[0].p
        self._obs_q = obs.bodies[0].q
        for seg in range(2):
            order = np.argsort(np.abs(np.array(offsets_per_seg[seg])), kind="stable")
            offsets_per_seg[seg] = np.array(offsets_per_seg[seg])[order]
            slots_per_seg[seg] = [slots_per_seg[seg][i] for i in order]
        self._schedule = _PoseSchedule(offsets_per_seg, slots_per_seg, self.substep)

    def _segment_rotations(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        beta_y0 = np.stack([x[..., lay.beta_y0(s)] for s in range(2)], axis=-1)
        return _yxy(beta_y0, x[..., lay.BETA_X, None], x[..., lay.BETA_Y1, None])

    def _segment_velocities(self, x: np.ndarray, rot: np.ndarray) -> np.ndarray:
        lay = self.layout
        b2 = np.stack([x[..., lay.b2(s)] for s in range(2)], axis=-1)
        b3 = np.stack([x[..., lay.b3(s)] for s in range(2)], axis=-1)
        local = np.stack([b3, b2, np.zeros_like(b2)], axis=-1)
        return self.fps * (rot @ local[..., None])[..., 0]

    def residual_gravity(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        zeros = np.zeros_like(x[..., lay.BETA_X])
        rot = _yxy(zeros, x[..., lay.BETA_X], x[..., lay.BETA_Y1])
        g_local = np.stack([zeros, x[..., lay.B1] * self.fps**2, zeros], axis=-1)
        return (GRAVITY_MAGNITUDE - (rot @ g_local[..., None])[..., 1, 0])[..., None]

    def residual_impulse(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        rot = self._segment_rotations(x)
        v = self._segment_velocities(x, rot)
        jn = x[..., lay.J, None] * self.plane_normal
        lin = v[..., 1, :] - v[..., 0, :] - jn
        ang = (
            x[..., lay.k(1)]
            - x[..., lay.k(0)]
            - np.cross(x[..., lay.X_C] - x[..., lay.B4], jn)
        )
        return np.concatenate([lin, ang], axis=-1)

    def residual_position(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        rot_all = self._segment_rotations(x)
        tau = self._obs_tau
        seg = self._obs_seg
        b1 = x[..., lay.B1, None]
        b2 = np.stack([x[..., lay.b2(s)] for s in range(2)], axis=-1)[..., seg]
        b3 = np.stack([x[..., lay.b3(s)] for s in range(2)], axis=-1)[..., seg]
        local = np.stack([b3 * tau, 0.5 * b1 * tau * tau + b2 * tau, np.zeros_like(b2)], axis=-1)
        pred = (rot_all[..., seg, :, :] @ local[..., None])[..., 0] + x[..., None, lay.B4]
        return (pred - self._obs_p).reshape(x.shape[:-1] + (3 * self.n_obs,))

    def residual_orientation(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        q_c = x[..., lay.Q_C]
        q_c = q_c / np.sqrt((q_c * q_c).sum(axis=-1))[..., None]
        q0 = np.stack([q_c, q_c], axis=-2)
        k = np.stack([x[..., lay.k(s)] for s in range(2)], axis=-2) / self.fps
        inertia = np.broadcast_to(self.inertia0, k.shape).astype(x.dtype)
        pred = self._schedule.run(q0.astype(x.dtype), k, inertia)
        sign = np.where((np.real(pred) * self._obs_q).sum(axis=-1) < 0, -1.0, 1.0)
        resid = pred - sign[..., None] * self._obs_q
        return resid.reshape(x.shape[:-1] + (4 * self.n_obs,))

    def block_slices(self) -> dict[str, slice]:
        blocks: dict[str, slice] = {}
        at = 0
        if self.mask.gravity:
            blocks["gravity"] = slice(at, at + 1)
            at += 1
        if self.mask.impulse:
            blocks["impulse"] = slice(at, at + 6)
            at += 6
        blocks["position"] = slice(at, at + 3 * self.n_obs)
        at += 3 * self.n_obs
        blocks["orientation"] = slice(at, at + 4 * self.n_obs)
        return blocks

    def assemble(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        w = self.weights
        parts = []
        if self.mask.gravity:
            parts.append(np.sqrt(w.w_g) * self.residual_gravity(x))
        if self.mask.impulse:
            parts.append(np.sqrt(w.w_imp) * self.residual_impulse(x))
        parts.append(np.sqrt(w.w_pos) * self.residual_position(x))
        parts.append(np.sqrt(w.w_ori) * self.residual_orientation(x))
        return np.concatenate(parts, axis=-1)

    def cost(self, x: np.ndarray) -> float:
        r = self.assemble(x)
        return 0.5 * float(np.real(r) @ np.real(r))

    def jacobian(self, x: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cols = np.arange(x.size) if cols is None else np.asarray(cols)
        h = 1e-30
        batch = np.repeat(x[None, :], len(cols), axis=0).astype(complex)
        batch[np.arange(len(cols)), cols] += 1j * h
        return (self.assemble(batch).imag / h).T

    def compute_restitution(self, x: np.ndarray) -> float:
        """Restitution with the static object's velocities set to zero."""
        x = np.asarray(x, dtype=float)
        lay = self.layout
        n = self.plane_normal
        rot = self._segment_rotations(x)
        v = self._segment_velocities(x, rot)
        q_c = x[lay.Q_C] / np.linalg.norm(x[lay.Q_C])
        lever = x[lay.X_C] - x[lay.B4]
        v_hat = []
        for seg in range(2):
            k_body = quat_rotate(quat_conjugate(q_c), x[lay.k(seg)])
            w = quat_rotate(q_c, k_body / self.inertia0)
            v_hat.append(v[seg] + np.cross(w, lever))
        denom = float(v_hat[0] @ n)
        if abs(denom) < 1e-9:
            raise UndefinedRestitutionError("zero approach velocity along the plane normal")
        return float(-(v_hat[1] @ n)) / denom
