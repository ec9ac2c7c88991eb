"""Jit-compiled pose-integration kernel shared by the residual evaluators.

The explicit Euler recurrence (angular velocity re-derived from constant
angular momentum, quaternion renormalized each substep) is identical to
dynamics._euler_substep but runs as one compiled loop over the whole substep
schedule, batched over unknown vectors and trajectory segments. It is
dtype-generic: complex128 inputs propagate complex-step perturbations.
"""
from __future__ import annotations

from numba import njit


@njit(cache=True)
def integrate_schedule(q0, k, inertia, dts, snap_after, snap_seg, snap_slot, out):
    """Integrate (batch, segment) poses through a substep plan with snapshots.

    q0: (B, S, 4), k: (B, S, 3), inertia: (B, S, 3), dts: (T, S) float64.
    Snapshot i copies segment snap_seg[i] into out[:, snap_slot[i], :] after
    snap_after[i] substeps (0 = before stepping). Snapshots sorted by step.
    """
    n_batch, n_seg = q0.shape[0], q0.shape[1]
    q = q0.copy()
    n_snap = snap_after.shape[0]
    ptr = 0
    while ptr < n_snap and snap_after[ptr] == 0:
        out[:, snap_slot[ptr], :] = q[:, snap_seg[ptr], :]
        ptr += 1
    for t in range(dts.shape[0]):
        for s in range(n_seg):
            dt = dts[t, s]
            if dt == 0.0:
                continue
            half_dt = 0.5 * dt
            for b in range(n_batch):
                qw, qx, qy, qz = q[b, s, 0], q[b, s, 1], q[b, s, 2], q[b, s, 3]
                kx, ky, kz = k[b, s, 0], k[b, s, 1], k[b, s, 2]
                # body-frame momentum: rotate k by the conjugate quaternion
                tx = 2.0 * (-qy * kz + qz * ky)
                ty = 2.0 * (-qz * kx + qx * kz)
                tz = 2.0 * (-qx * ky + qy * kx)
                bx = kx + qw * tx + (-qy * tz + qz * ty)
                by = ky + qw * ty + (-qz * tx + qx * tz)
                bz = kz + qw * tz + (-qx * ty + qy * tx)
                # divide by the reference inertia, rotate back to world
                bx /= inertia[b, s, 0]
                by /= inertia[b, s, 1]
                bz /= inertia[b, s, 2]
                tx = 2.0 * (qy * bz - qz * by)
                ty = 2.0 * (qz * bx - qx * bz)
                tz = 2.0 * (qx * by - qy * bx)
                wx = bx + qw * tx + (qy * tz - qz * ty)
                wy = by + qw * ty + (qz * tx - qx * tz)
                wz = bz + qw * tz + (qx * ty - qy * tx)
                # q += (dt/2)·(0,w)⊗q, then renormalize
                nw = qw + half_dt * (-wx * qx - wy * qy - wz * qz)
                nx = qx + half_dt * (wx * qw + wy * qz - wz * qy)
                ny = qy + half_dt * (-wx * qz + wy * qw + wz * qx)
                nz = qz + half_dt * (wx * qy - wy * qx + wz * qw)
                inv_norm = 1.0 / (nw * nw + nx * nx + ny * ny + nz * nz) ** 0.5
                q[b, s, 0] = nw * inv_norm
                q[b, s, 1] = nx * inv_norm
                q[b, s, 2] = ny * inv_norm
                q[b, s, 3] = nz * inv_norm
        while ptr < n_snap and snap_after[ptr] == t + 1:
            out[:, snap_slot[ptr], :] = q[:, snap_seg[ptr], :]
            ptr += 1
