"""Shared test utilities: ground-truth unknown vectors built from simulator events."""
import numpy as np

from impactlab.residuals import SingleBodyLayout, UnknownLayout
from impactlab.simulator import GroundTruth


def _segment_params(v_mps: np.ndarray, fps: float) -> tuple[float, float, float]:
    """Exact (b2, b3, beta_y0) for a velocity in the gravity-aligned gauge."""
    v = np.asarray(v_mps) / fps
    b2 = float(v[1])
    b3 = float(np.hypot(v[0], v[2]))
    beta_y0 = float(np.arctan2(-v[2], v[0])) if b3 > 0 else 0.0
    return b2, b3, beta_y0


def ground_truth_unknowns(gt: GroundTruth) -> tuple[np.ndarray, float]:
    """(unknown vector, t_c) reproducing the first simulated event exactly."""
    ev = gt.events[0]
    lay = UnknownLayout
    x = np.zeros(lay.SIZE)
    x[lay.B1] = 9.81 / gt.fps**2
    x[lay.BETA_X] = 0.0
    x[lay.BETA_Y1] = 0.0
    for body in range(2):
        for side, state in ((0, ev.pre[body]), (1, ev.post[body])):
            seg = 2 * body + side
            b2, b3, by0 = _segment_params(state.v, gt.fps)
            x[lay.b2(seg)] = b2
            x[lay.b3(seg)] = b3
            x[lay.beta_y0(seg)] = by0
            x[lay.k(seg)] = state.k
        x[lay.b4(body)] = ev.pre[body].p
        x[lay.q_c(body)] = ev.pre[body].q
    x[lay.X_C] = ev.x_c
    x[lay.JN] = ev.jn
    x[lay.M_BA] = gt.mass_ratio
    return x, float(ev.t)


def ground_truth_unknowns_single(gt: GroundTruth, plane_normal: np.ndarray) -> tuple[np.ndarray, float]:
    ev = gt.events[0]
    lay = SingleBodyLayout
    x = np.zeros(lay.SIZE)
    x[lay.B1] = 9.81 / gt.fps**2
    for side, state in ((0, ev.pre[0]), (1, ev.post[0])):
        b2, b3, by0 = _segment_params(state.v, gt.fps)
        x[lay.b2(side)] = b2
        x[lay.b3(side)] = b3
        x[lay.beta_y0(side)] = by0
        x[lay.k(side)] = state.k
    x[lay.B4] = ev.pre[0].p
    x[lay.Q_C] = ev.pre[0].q
    x[lay.X_C] = ev.x_c
    x[lay.J] = float(ev.jn @ np.asarray(plane_normal))
    return x, float(ev.t)
