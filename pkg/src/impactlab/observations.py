"""Sparse annotated pose observations, the solver's input."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientDataError


@dataclass
class BodyObservations:
    """Annotated samples of one body: frame times, positions, orientations."""

    name: str
    dims: np.ndarray
    t: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.dims = np.asarray(self.dims, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.p = np.asarray(self.p, dtype=float).reshape(len(self.t), 3)
        self.q = np.asarray(self.q, dtype=float).reshape(len(self.t), 4)
        if not np.all(self.dims > 0):
            raise ValueError(f"body {self.name!r}: dims must be positive")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError(f"body {self.name!r}: frames must be strictly increasing")

    def split_counts(self, t_c: float) -> tuple[int, int]:
        """Observations on each side of t_c; a sample exactly at t_c counts as pre."""
        pre = int(np.sum(self.t <= t_c))
        return pre, len(self.t) - pre

    @property
    def half_diagonal(self) -> float:
        return 0.5 * float(np.linalg.norm(self.dims))


@dataclass
class ObservationSet:
    """Observations for the bodies of one recorded collision."""

    bodies: tuple[BodyObservations, ...]
    fps: float

    def __post_init__(self):
        self.bodies = tuple(self.bodies)
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if len(self.bodies) not in (1, 2):
            raise ValueError("expected one or two observed bodies")

    def require_two_per_side(self, t_c: float) -> None:
        for body in self.bodies:
            pre, post = body.split_counts(t_c)
            if pre < 2 or post < 2:
                side = "pre" if pre < 2 else "post"
                raise InsufficientDataError(
                    f"body {body.name!r} has fewer than 2 observations on the "
                    f"{side}-collision side of frame {t_c:g}"
                )

    def translated(self, offset: np.ndarray) -> "ObservationSet":
        offset = np.asarray(offset, dtype=float)
        return ObservationSet(
            bodies=tuple(replace(b, p=b.p + offset) for b in self.bodies),
            fps=self.fps,
        )
