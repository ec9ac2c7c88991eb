"""Shared-gauge ballistic parabolas.

The trajectory time variable is frames relative to the collision frame, so
t = 0 is the collision instant for every segment. One global gauge (curvature
b1, tilt angles beta_x / beta_y1) is shared by all segments of a scene and
pins a single world gravity vector; the world +y axis points along gravity
(bodies accelerate toward +y at b1·fps² ≈ 9.81 m/s²). Each segment adds its
own in-plane coefficients b2, b3 and a rotation beta_y0 about the gravity
axis; the pre- and post-collision segments of one body share a single Offset
so they meet at t = 0 by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY_MAGNITUDE = 9.81


@dataclass
class GlobalGauge:
    """Scene-wide trajectory gauge: gravity curvature and shared tilt angles."""

    b1: float
    beta_x: float
    beta_y1: float
    fps: float

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if not np.real(self.b1) > 0:
            raise ValueError("b1 must be positive")


@dataclass
class Offset:
    """Collision-time position b4, shared by one body's pre and post segments."""

    b4: np.ndarray

    def __post_init__(self):
        self.b4 = np.asarray(self.b4)


@dataclass
class ParabolaParams:
    """Per-segment curve coefficients; offset is a shared reference, not a copy."""

    b2: float
    b3: float
    beta_y0: float
    offset: Offset = field(default_factory=lambda: Offset(np.zeros(3)))


def _ry(angle) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [
            np.stack([c, zero, s], axis=-1),
            np.stack([zero, one, zero], axis=-1),
            np.stack([-s, zero, c], axis=-1),
        ],
        axis=-2,
    )


def _rx(angle) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [
            np.stack([one, zero, zero], axis=-1),
            np.stack([zero, c, -s], axis=-1),
            np.stack([zero, s, c], axis=-1),
        ],
        axis=-2,
    )


def yxy_rotation(beta_y0, beta_x, beta_y1) -> np.ndarray:
    """Proper Euler Y-X-Y rotation Ry(beta_y0)·Rx(beta_x)·Ry(beta_y1). Batched."""
    return _ry(np.asarray(beta_y0)) @ _rx(np.asarray(beta_x)) @ _ry(np.asarray(beta_y1))


def eval_parabola(gauge: GlobalGauge, seg: ParabolaParams, t) -> np.ndarray:
    """Position at frame offset t: R·(b3·t, b1/2·t² + b2·t, 0)ᵀ + b4."""
    t = np.asarray(t)
    local = np.stack(
        [seg.b3 * t, 0.5 * gauge.b1 * t * t + seg.b2 * t, np.zeros_like(t)], axis=-1
    )
    rot = yxy_rotation(seg.beta_y0, gauge.beta_x, gauge.beta_y1)
    return (rot @ local[..., None])[..., 0] + seg.offset.b4


def eval_velocity(gauge: GlobalGauge, seg: ParabolaParams, t) -> np.ndarray:
    """Velocity in m/s at frame offset t: fps·R·(b3, b1·t + b2, 0)ᵀ."""
    t = np.asarray(t)
    ones = np.ones_like(t)
    local = np.stack([seg.b3 * ones, gauge.b1 * t + seg.b2, np.zeros_like(t)], axis=-1)
    rot = yxy_rotation(seg.beta_y0, gauge.beta_x, gauge.beta_y1)
    return gauge.fps * (rot @ local[..., None])[..., 0]


def gravity_vector(gauge: GlobalGauge) -> np.ndarray:
    """World acceleration implied by the gauge, in m/s²."""
    rot = yxy_rotation(0.0, gauge.beta_x, gauge.beta_y1)
    return rot @ np.array([0.0, gauge.b1 * gauge.fps**2, 0.0])
