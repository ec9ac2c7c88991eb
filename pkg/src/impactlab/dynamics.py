"""Rigid-body value math: quaternions, inertia, momentum, impulses, pose integration.

Conventions used throughout the package:

- Quaternions are scalar-first ``[w, x, y, z]`` numpy arrays.
- Angular state is stored as angular momentum ``k`` (the conserved quantity
  in free flight), never as angular velocity; ``w`` is always derived from
  ``k`` via the current pose and the reference-pose diagonal inertia.
- Masses are relative (body "a" of a pair is fixed to 1); a static body is
  modelled with ``mass = inf`` and infinite inertia entries.
- Every function is pure and accepts leading batch dimensions on the
  quaternion/vector arguments. Complex-valued inputs are permitted so the
  residual Jacobian can be evaluated by complex-step perturbation; for that
  reason norms here are computed as ``sqrt(sum(x*x))`` and never via
  ``np.linalg.norm``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


def _vnorm(v: np.ndarray) -> np.ndarray:
    # complex-analytic norm (no conjugation); fine while Re(norm²) > 0
    return np.sqrt((v * v).sum(axis=-1))


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross has large per-call overhead; the last axis is always length 3 here
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q)
    return q / _vnorm(q)[..., None]


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b, scalar-first, batched."""
    a = np.asarray(a)
    b = np.asarray(b)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by unit quaternion(s) q."""
    q = np.asarray(q)
    v = np.asarray(v)
    qv = q[..., 1:]
    w = q[..., 0:1]
    t = 2.0 * _cross3(qv, v)
    return v + w * t + _cross3(qv, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[0], q[1], q[2], q[3]
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = float(np.sqrt((axis * axis).sum()))
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    h = 0.5 * angle
    return np.concatenate([[np.cos(h)], np.sin(h) / n * axis])


def quat_to_axis_angle(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion, shortest arc."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    s = float(np.sqrt((q[1:] * q[1:]).sum()))
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, q[0])
    return q[1:] * (angle / s)


def quat_slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    """Spherical interpolation with sign alignment; falls back to lerp for tiny arcs."""
    q0 = quat_normalize(np.asarray(q0, dtype=float))
    q1 = np.asarray(q1, dtype=float)
    if float(np.dot(q0, q1)) < 0.0:
        q1 = -q1
    q1 = quat_normalize(q1)
    d = float(np.clip(np.dot(q0, q1), -1.0, 1.0))
    if d > 1.0 - 1e-10:
        return quat_normalize(q0 + u * (q1 - q0))
    theta = np.arccos(d)
    return (np.sin((1 - u) * theta) * q0 + np.sin(u * theta) * q1) / np.sin(theta)


@dataclass
class BodyState:
    """Instantaneous rigid-body state in relative-mass units.

    p: world position of the center of mass [m]
    q: orientation quaternion (unit, scalar-first)
    v: linear velocity [m/s]
    k: angular momentum [kg·m²/s], constant in free flight
    mass: relative mass (> 0, inf for static bodies)
    inertia0: reference-pose diagonal moment of inertia (> 0 componentwise)
    """

    p: np.ndarray
    q: np.ndarray
    v: np.ndarray
    k: np.ndarray
    mass: float
    inertia0: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.k = np.asarray(self.k, dtype=float)
        self.inertia0 = np.asarray(self.inertia0, dtype=float)
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not np.all(self.inertia0 > 0):
            raise ValueError("inertia components must be positive")


@dataclass
class Impulse:
    """Instantaneous momentum exchange jn applied at world point x_c."""

    jn: np.ndarray
    x_c: np.ndarray

    def __post_init__(self):
        self.jn = np.asarray(self.jn, dtype=float)
        self.x_c = np.asarray(self.x_c, dtype=float)
        if not (np.all(np.isfinite(self.jn)) and np.all(np.isfinite(self.x_c))):
            raise ValueError("impulse components must be finite")


def cuboid_inertia(dims: np.ndarray, mass: float) -> np.ndarray:
    """Diagonal inertia of a solid cuboid with side lengths dims, about its center."""
    dims = np.asarray(dims, dtype=float)
    if not np.all(dims > 0):
        raise ValueError("cuboid dimensions must be positive")
    if not mass > 0:
        raise ValueError("mass must be positive")
    sx, sy, sz = dims
    return (mass / 12.0) * np.array([sy * sy + sz * sz, sx * sx + sz * sz, sx * sx + sy * sy])


def angular_velocity_from_momentum(q: np.ndarray, inertia0: np.ndarray, k: np.ndarray) -> np.ndarray:
    """w = R(q) · I₀⁻¹ · R(q)ᵀ · k for a diagonal reference inertia."""
    inertia0 = np.asarray(inertia0)
    if not np.all(np.real(inertia0) > 0):
        raise ValueError("inertia components must be positive")
    k_body = quat_rotate(quat_conjugate(np.asarray(q)), k)
    return quat_rotate(q, k_body / inertia0)


def momentum_from_angular_velocity(q: np.ndarray, inertia0: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Inverse map k = R(q) · I₀ · R(q)ᵀ · w."""
    inertia0 = np.asarray(inertia0)
    w_body = quat_rotate(quat_conjugate(np.asarray(q)), w)
    return quat_rotate(q, w_body * inertia0)


def point_velocity(state: BodyState, x_c: np.ndarray) -> np.ndarray:
    """Material velocity v + w × (x_c − p) of the body point at world x_c."""
    w = angular_velocity_from_momentum(state.q, state.inertia0, state.k)
    return state.v + np.cross(w, np.asarray(x_c) - state.p)


def _euler_substep(q: np.ndarray, k: np.ndarray, inertia0: np.ndarray, dt) -> np.ndarray:
    """One explicit step q ← q + (dt/2)(0,w)⊗q, renormalized. Batched, complex-safe."""
    w = angular_velocity_from_momentum(q, inertia0, k)
    wq = np.concatenate([np.zeros_like(w[..., :1]), w], axis=-1)
    q = q + 0.5 * np.asarray(dt)[..., None] * quat_multiply(wq, q)
    return quat_normalize(q)


def integrate_pose(
    q0: np.ndarray,
    k: np.ndarray,
    inertia0: np.ndarray,
    t_span: float,
    substep: float,
) -> np.ndarray:
    """Integrate a torque-free pose over t_span by repeated explicit Euler steps.

    The angular velocity is re-derived from the constant angular momentum k at
    every substep and the quaternion is renormalized after each step. t_span
    and substep share the time unit of k (the caller keeps frames vs seconds
    consistent); negative t_span integrates backward.
    """
    if substep == 0:
        raise ValueError("substep must be nonzero")
    substep = abs(float(substep))
    k = np.asarray(k)
    q = np.asarray(q0)
    q = q.astype(np.result_type(q.dtype, k.dtype, np.float64))
    remaining = abs(float(t_span))
    sign = 1.0 if t_span >= 0 else -1.0
    while remaining > 1e-12:
        dt = min(substep, remaining)
        q = _euler_substep(q, k, inertia0, np.asarray(sign * dt))
        remaining -= dt
    return q


def integrate_pose_checkpoints(
    q0: np.ndarray,
    k: np.ndarray,
    inertia0: np.ndarray,
    times: np.ndarray,
    substep: float,
) -> np.ndarray:
    """Poses at several same-sign times along one integration pass.

    times must be sorted by magnitude. When every time lies on the substep
    grid the result at times[i] is bit-identical to
    integrate_pose(q0, k, inertia0, times[i], substep).
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty((0, 4))
    signs = np.sign(times[times != 0])
    if signs.size and (np.any(signs != signs[0])):
        raise ValueError("checkpoint times must share one sign")
    sign = float(signs[0]) if signs.size else 1.0
    mags = np.abs(times)
    if np.any(np.diff(mags) < 0):
        raise ValueError("checkpoint times must be sorted by magnitude")
    substep = abs(float(substep))
    if substep == 0:
        raise ValueError("substep must be nonzero")

    k = np.asarray(k)
    q = np.asarray(q0)
    q = q.astype(np.result_type(q.dtype, k.dtype, np.float64))
    out = np.empty(times.shape[:1] + q.shape, dtype=q.dtype)
    t = 0.0
    i = 0
    while i < len(mags):
        while i < len(mags) and mags[i] <= t + 1e-12:
            out[i] = q
            i += 1
        if i >= len(mags):
            break
        dt = min(substep, mags[i] - t)
        q = _euler_substep(q, k, inertia0, np.asarray(sign * dt))
        t += dt
    return out


def apply_impulse(a: BodyState, b: BodyState, imp: Impulse) -> tuple[BodyState, BodyState]:
    """Exchange the impulse between two bodies with opposite signs.

    Velocities and angular momenta change; positions and poses do not.
    """
    jn = imp.jn
    a_new = replace(
        a,
        v=a.v + jn / a.mass,
        k=a.k + np.cross(imp.x_c - a.p, jn),
    )
    b_new = replace(
        b,
        v=b.v - jn / b.mass,
        k=b.k - np.cross(imp.x_c - b.p, jn),
    )
    return a_new, b_new
