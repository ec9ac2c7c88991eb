"""Three-phase nonlinear least-squares reconstruction driver.

Phase 1 sweeps candidate collision segments (between consecutive observation
times), solving trajectories + momentum + gravity without the impulse terms,
and fixes the collision frame t_c at the segment whose fitted offsets come
closest. Phase 2 activates the impulse coupling with the collision point
pinned to the midpoint of the two offsets. Phase 3 frees the collision point
and refines everything, then reads off the coefficient of restitution.

The minimizer is a damped Gauss-Newton (Levenberg-Marquardt with Marquardt
diagonal scaling) over a selectable free-slot subset, with a monotone accept
rule. After every accepted step the collision-pose quaternions are
renormalized and the mass ratio is clamped to its bounds; hitting a bound is
reported, not hidden, since it marks an unreliable solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    cuboid_inertia,
    momentum_from_angular_velocity,
    quat_conjugate,
    quat_multiply,
    quat_slerp,
    quat_to_axis_angle,
)
from .errors import NoCollisionFoundError, UndefinedRestitutionError
from .observations import ObservationSet
from .residuals import (
    MASS_RATIO_BOUNDS,
    CollisionProblem,
    DecodedUnknowns,
    PhaseMask,
    SingleBodyLayout,
    SingleBodyProblem,
    UnknownLayout,
    Weights,
)
from .trajectory import GRAVITY_MAGNITUDE


@dataclass
class SolveConfig:
    weights: Weights = field(default_factory=Weights)
    max_iterations: int = 200
    phase1_iterations: int = 60
    max_candidates: int = 8
    tol_cost: float = 1e-12
    tol_step: float = 1e-12
    substep: float = 0.25
    seed: int = 0
    mass_ratio_bounds: tuple[float, float] = MASS_RATIO_BOUNDS
    # best fitted offset distance above this multiple of the bodies' summed
    # half-diagonals means the trajectories never meet
    collision_distance_factor: float = 2.0

    def __post_init__(self):
        if self.tol_cost <= 0 or self.tol_step <= 0:
            raise ValueError("convergence tolerances must be positive")
        if not 0 < self.substep <= 0.25:
            raise ValueError("substep must lie in (0, 0.25] frames")


@dataclass
class SolveFlags:
    mass_at_bound: bool = False
    restitution_out_of_range: bool = False
    non_converged: bool = False

    @property
    def any(self) -> bool:
        return self.mass_at_bound or self.restitution_out_of_range or self.non_converged


@dataclass
class SolutionRecord:
    """Optimized unknowns plus derived restitution and diagnostics."""

    x: np.ndarray
    t_c: float
    restitution: float
    flags: SolveFlags
    residual_norms: dict[str, float]
    cost: float
    obs: ObservationSet
    single_body: bool = False
    plane_point: np.ndarray | None = None
    plane_normal: np.ndarray | None = None

    @property
    def fps(self) -> float:
        return self.obs.fps

    @property
    def mass_ratio(self) -> float:
        if self.single_body:
            return math.inf  # the unobserved static object
        return float(self.x[UnknownLayout.M_BA])

    @property
    def impulse(self) -> np.ndarray:
        if self.single_body:
            return float(self.x[SingleBodyLayout.J]) * self.plane_normal
        return self.x[UnknownLayout.JN].copy()

    def problem(self) -> CollisionProblem | SingleBodyProblem:
        if self.single_body:
            return SingleBodyProblem(self.obs, self.t_c, self.plane_point, self.plane_normal)
        return CollisionProblem(self.obs, self.t_c)

    def decode(self) -> DecodedUnknowns:
        if self.single_body:
            raise ValueError("decode() applies to two-body records")
        return CollisionProblem(self.obs, self.t_c).decode(self.x)


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    cost_history: list[float]
    converged: bool
    iterations: int


def _complex_step_jacobian(fun, x: np.ndarray, cols: np.ndarray, h: float = 1e-30) -> np.ndarray:
    batch = np.repeat(x[None, :], len(cols), axis=0).astype(complex)
    batch[np.arange(len(cols)), cols] += 1j * h
    return (fun(batch).imag / h).T


def levenberg_marquardt(
    fun,
    x0: np.ndarray,
    free: np.ndarray,
    max_iterations: int,
    tol_cost: float,
    tol_step: float,
    post_step=None,
) -> LMResult:
    """Minimize 0.5·‖fun(x)‖² over x[free] with a monotone accept rule.

    fun must accept batches of unknown vectors and be complex-step safe.
    post_step projects a trial point back onto the feasible set (quaternion
    renormalization, bound clamping, pinned slots) before it is evaluated,
    so accepted iterates are always feasible.
    """
    x = x0.copy()
    if post_step is not None:
        x = post_step(x)
    r = np.real(fun(x))
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        jac = _complex_step_jacobian(fun, x, free)
        grad = jac.T @ r
        hess = jac.T @ jac
        diag = np.maximum(np.diag(hess), 1e-12)

        accepted = False
        while lam <= 1e12:
            try:
                delta = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(hess + lam * np.diag(diag), -grad, rcond=None)[0]
            x_new = x.copy()
            x_new[free] += delta
            if post_step is not None:
                x_new = post_step(x_new)
            r_new = np.real(fun(x_new))
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            # no descent direction even with near-zero steps: numerically stationary
            converged = True
            break

        decrease = cost - cost_new
        step_norm = float(np.linalg.norm(delta))
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 3.0, 1e-10)
        if decrease < tol_cost or step_norm < tol_step or cost < 1e-18:
            converged = True
            break

    return LMResult(x=x, cost=cost, cost_history=history, converged=converged, iterations=iterations)


# -- initialization ----------------------------------------------------------


def candidate_segments(obs: ObservationSet) -> list[tuple[float, float]]:
    """Consecutive observation-time intervals that can bracket the collision."""
    times = np.unique(np.concatenate([b.t for b in obs.bodies]))
    segments = []
    for lo, hi in zip(times[:-1], times[1:]):
        t_c = 0.5 * (lo + hi)
        if all(b.split_counts(t_c)[0] >= 2 and b.split_counts(t_c)[1] >= 2 for b in obs.bodies):
            segments.append((float(lo), float(hi)))
    return segments


def _bracketing(body, t_c: float) -> tuple[int, int, float]:
    i_pre = int(np.searchsorted(body.t, t_c, side="right")) - 1
    i_post = i_pre + 1
    u = (t_c - body.t[i_pre]) / (body.t[i_post] - body.t[i_pre])
    return i_pre, i_post, float(u)


def _finite_difference_spin(body, i0: int, i1: int) -> np.ndarray:
    """Rotation rate (rad/frame vector) between two observed poses."""
    q1 = body.q[i1] if float(body.q[i0] @ body.q[i1]) >= 0 else -body.q[i1]
    dq = quat_multiply(q1, quat_conjugate(body.q[i0]))
    return quat_to_axis_angle(dq) / (body.t[i1] - body.t[i0])


def _body_pose_init(body, t_c: float, inertia0: np.ndarray):
    """Collision pose by slerp; per-side angular momenta from finite pose
    differences of each side's own adjacent observations (the spin jumps at
    the collision, so differencing across the gap would blend the two)."""
    i0, i1, u = _bracketing(body, t_c)
    q_c = quat_slerp(body.q[i0], body.q[i1], u)
    b4 = (1 - u) * body.p[i0] + u * body.p[i1]
    # require_two_per_side guarantees i0-1 and i1+1 exist
    w_pre = _finite_difference_spin(body, i0 - 1, i0)
    w_post = _finite_difference_spin(body, i1, i1 + 1)
    k_pre = momentum_from_angular_velocity(q_c, inertia0, w_pre)
    k_post = momentum_from_angular_velocity(q_c, inertia0, w_post)
    return q_c, b4, k_pre, k_post


def initialize(
    obs: ObservationSet,
    segment: tuple[float, float],
    config: SolveConfig,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Default-parabola unknown vector for one candidate collision segment.

    Parabola defaults: b2 = -0.05, b3 = 1/fps, beta_y0 = 20 deg, shared tilts
    zero, b1 at the gravity constant; the impulse starts at seeded random
    components around 0.1 and the mass ratio at 1.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    t_c = 0.5 * (segment[0] + segment[1])
    obs.require_two_per_side(t_c)
    lay = UnknownLayout
    x = np.zeros(lay.SIZE)
    x[lay.B1] = GRAVITY_MAGNITUDE / obs.fps**2
    for seg in range(4):
        x[lay.b2(seg)] = -0.05
        x[lay.b3(seg)] = 1.0 / obs.fps
        x[lay.beta_y0(seg)] = math.radians(20.0)
    for body_idx, body in enumerate(obs.bodies):
        inertia0 = cuboid_inertia(body.dims, 1.0)
        q_c, b4, k_pre, k_post = _body_pose_init(body, t_c, inertia0)
        x[lay.q_c(body_idx)] = q_c
        x[lay.b4(body_idx)] = b4
        # momentum slots are per-second; the finite differences are per-frame
        x[lay.k(2 * body_idx)] = k_pre * obs.fps
        x[lay.k(2 * body_idx + 1)] = k_post * obs.fps
    x[lay.JN] = rng.uniform(0.05, 0.15, size=3)
    x[lay.M_BA] = 1.0
    x[lay.X_C] = 0.5 * (x[lay.b4(0)] + x[lay.b4(1)])
    return x, t_c


# -- phase machinery ----------------------------------------------------------


def _free_slots(layout, exclude: list) -> np.ndarray:
    mask = np.ones(layout.SIZE, dtype=bool)
    for item in exclude:
        mask[item] = False
    return np.flatnonzero(mask)


def _two_body_post_step(config: SolveConfig, pin_xc: bool):
    lay = UnknownLayout
    lo, hi = config.mass_ratio_bounds

    def post(x: np.ndarray) -> np.ndarray:
        x = x.copy()
        for body in range(2):
            q = x[lay.q_c(body)]
            x[lay.q_c(body)] = q / np.linalg.norm(q)
        x[lay.M_BA] = min(max(x[lay.M_BA], lo), hi)
        if pin_xc:
            x[lay.X_C] = 0.5 * (x[lay.b4(0)] + x[lay.b4(1)])
        return x

    return post


def _pin_xc_midpoint(x: np.ndarray) -> np.ndarray:
    """Batched substitution x_c := (b4_a + b4_b)/2, differentiated through."""
    lay = UnknownLayout
    x = np.array(x, copy=True)
    x[..., lay.X_C] = 0.5 * (x[..., lay.b4(0)] + x[..., lay.b4(1)])
    return x


def phase1_select_tc(
    obs: ObservationSet, config: SolveConfig, rng: np.random.Generator | None = None
) -> tuple[float, np.ndarray]:
    """Sweep candidate segments and fix t_c where the fitted offsets meet.

    Candidates are screened to the closest few by raw interpolated distance
    (the worst case stays at eight solves); each screened candidate is
    re-initialized and minimized without the impulse terms, and the segment
    minimizing the fitted ‖b4_a - b4_b‖ wins.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    segments = candidate_segments(obs)
    if not segments:
        raise NoCollisionFoundError("no observation segment admits two poses per side")

    def raw_distance(segment):
        t_c = 0.5 * (segment[0] + segment[1])
        ps = []
        for body in obs.bodies:
            i0, i1, u = _bracketing(body, t_c)
            ps.append((1 - u) * body.p[i0] + u * body.p[i1])
        return float(np.linalg.norm(ps[0] - ps[1]))

    segments = sorted(segments, key=raw_distance)[: config.max_candidates]
    segments.sort()  # deterministic solve order

    lay = UnknownLayout
    mask = PhaseMask(momentum=True, impulse=False, gravity=True)
    free = _free_slots(lay, [lay.X_C, lay.JN])
    post = _two_body_post_step(config, pin_xc=False)

    candidates = []
    for segment in segments:
        x0, t_c = initialize(obs, segment, config, rng)
        problem = CollisionProblem(obs, t_c, config.weights, mask, config.substep)
        result = levenberg_marquardt(
            problem.assemble, x0, free, config.phase1_iterations, config.tol_cost, config.tol_step, post
        )
        if not np.isfinite(result.cost):
            continue
        dist = float(np.linalg.norm(result.x[lay.b4(0)] - result.x[lay.b4(1)]))
        candidates.append((dist, result.cost, t_c, result.x))

    if not candidates:
        raise NoCollisionFoundError("every candidate segment solve diverged")
    # a segment that misassigns observations around the collision fits the
    # data visibly worse; only comparably good fits compete on distance
    best_cost = min(c[1] for c in candidates)
    eligible = [c for c in candidates if c[1] <= 1.5 * best_cost + 1e-12]
    dist, _, t_c, x = min(eligible, key=lambda c: c[0])
    threshold = config.collision_distance_factor * sum(b.half_diagonal for b in obs.bodies)
    if dist > threshold:
        raise NoCollisionFoundError(
            f"closest fitted approach {dist:.3g} m exceeds contact threshold {threshold:.3g} m"
        )
    return t_c, x


def phase2_solve(
    warm: np.ndarray, t_c: float, obs: ObservationSet, config: SolveConfig
) -> tuple[np.ndarray, bool]:
    """Full energy with the collision point pinned to the offsets' midpoint."""
    problem = CollisionProblem(obs, t_c, config.weights, PhaseMask(), config.substep)

    def fun(x):
        return problem.assemble(_pin_xc_midpoint(x))

    lay = UnknownLayout
    free = _free_slots(lay, [lay.X_C])
    post = _two_body_post_step(config, pin_xc=True)
    result = levenberg_marquardt(
        fun, warm, free, config.max_iterations, config.tol_cost, config.tol_step, post
    )
    return result.x, result.converged


def phase3_refine(
    warm: np.ndarray, t_c: float, obs: ObservationSet, config: SolveConfig, phase2_converged: bool = True
) -> SolutionRecord:
    """Free the collision point, refine everything, derive restitution and flags."""
    problem = CollisionProblem(obs, t_c, config.weights, PhaseMask(), config.substep)
    lay = UnknownLayout
    free = _free_slots(lay, [])
    post = _two_body_post_step(config, pin_xc=False)
    result = levenberg_marquardt(
        problem.assemble, warm, free, config.max_iterations, config.tol_cost, config.tol_step, post
    )

    try:
        restitution = problem.compute_restitution(result.x)
    except UndefinedRestitutionError:
        restitution = math.nan

    lo, hi = config.mass_ratio_bounds
    m = float(result.x[lay.M_BA])
    flags = SolveFlags(
        mass_at_bound=(m <= lo * (1 + 1e-6) or m >= hi * (1 - 1e-6)),
        restitution_out_of_range=not (0.0 <= restitution <= 1.0),
        non_converged=not (result.converged and phase2_converged),
    )
    final = problem.assemble(result.x)
    norms = {name: float(np.linalg.norm(final[sl])) for name, sl in problem.block_slices().items()}
    return SolutionRecord(
        x=result.x,
        t_c=t_c,
        restitution=restitution,
        flags=flags,
        residual_norms=norms,
        cost=result.cost,
        obs=obs,
    )


def reconstruct(obs: ObservationSet, config: SolveConfig | None = None) -> SolutionRecord:
    """Full pipeline: initialize, segment search, pinned solve, free refinement."""
    config = config or SolveConfig()
    rng = np.random.default_rng(config.seed)
    t_c, warm = phase1_select_tc(obs, config, rng)
    x2, converged2 = phase2_solve(warm, t_c, obs, config)
    return phase3_refine(x2, t_c, obs, config, phase2_converged=converged2)


# -- single-body (infinite mass) variant --------------------------------------


def _plane_project(point: np.ndarray, normal: np.ndarray):
    def project(b4):
        return b4 - ((b4 - point) @ normal)[..., None] * normal

    return project


def initialize_single_body(
    obs: ObservationSet,
    segment: tuple[float, float],
    plane_point: np.ndarray,
    plane_normal: np.ndarray,
    config: SolveConfig,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    t_c = 0.5 * (segment[0] + segment[1])
    obs.require_two_per_side(t_c)
    lay = SingleBodyLayout
    body = obs.bodies[0]
    x = np.zeros(lay.SIZE)
    x[lay.B1] = GRAVITY_MAGNITUDE / obs.fps**2
    for seg in range(2):
        x[lay.b2(seg)] = -0.05
        x[lay.b3(seg)] = 1.0 / obs.fps
        x[lay.beta_y0(seg)] = math.radians(20.0)
    q_c, b4, k_pre, k_post = _body_pose_init(body, t_c, cuboid_inertia(body.dims, 1.0))
    x[lay.Q_C] = q_c
    x[lay.B4] = b4
    x[lay.k(0)] = k_pre * obs.fps
    x[lay.k(1)] = k_post * obs.fps
    x[lay.J] = rng.uniform(0.05, 0.15)
    x[lay.X_C] = _plane_project(np.asarray(plane_point, float), np.asarray(plane_normal, float))(b4)
    return x, t_c


def _single_body_post_step(pin_xc, project):
    lay = SingleBodyLayout

    def post(x: np.ndarray) -> np.ndarray:
        x = x.copy()
        q = x[lay.Q_C]
        x[lay.Q_C] = q / np.linalg.norm(q)
        if pin_xc:
            x[lay.X_C] = project(x[lay.B4])
        return x

    return post


def reconstruct_single_body(
    obs: ObservationSet,
    plane_point: np.ndarray,
    plane_normal: np.ndarray,
    config: SolveConfig | None = None,
) -> SolutionRecord:
    """Bounce reconstruction against a static plane (mass ratio removed).

    Phase 1 selects the segment whose fitted offset lands nearest the plane;
    phase 2 pins the contact to the offset's plane projection; phase 3 frees
    it. Restitution uses zero velocities for the static object.
    """
    config = config or SolveConfig()
    if len(obs.bodies) != 1:
        raise ValueError("single-body reconstruction expects exactly one observed body")
    rng = np.random.default_rng(config.seed)
    point = np.asarray(plane_point, dtype=float)
    normal = np.asarray(plane_normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    project = _plane_project(point, normal)
    lay = SingleBodyLayout

    segments = candidate_segments(obs)
    if not segments:
        raise NoCollisionFoundError("no observation segment admits two poses per side")

    def raw_distance(segment):
        t_c = 0.5 * (segment[0] + segment[1])
        i0, i1, u = _bracketing(obs.bodies[0], t_c)
        p = (1 - u) * obs.bodies[0].p[i0] + u * obs.bodies[0].p[i1]
        return abs(float((p - point) @ normal))

    segments = sorted(segments, key=raw_distance)[: config.max_candidates]
    segments.sort()

    mask = PhaseMask(momentum=False, impulse=False, gravity=True)
    free1 = _free_slots(lay, [lay.X_C, lay.J])
    post1 = _single_body_post_step(pin_xc=False, project=project)
    candidates = []
    for segment in segments:
        x0, t_c = initialize_single_body(obs, segment, point, normal, config, rng)
        problem = SingleBodyProblem(obs, t_c, point, normal, config.weights, mask, config.substep)
        result = levenberg_marquardt(
            problem.assemble, x0, free1, config.phase1_iterations, config.tol_cost, config.tol_step, post1
        )
        if not np.isfinite(result.cost):
            continue
        dist = abs(float((result.x[lay.B4] - point) @ normal))
        candidates.append((dist, result.cost, t_c, result.x))
    if not candidates:
        raise NoCollisionFoundError("every candidate segment solve diverged")
    best_cost = min(c[1] for c in candidates)
    eligible = [c for c in candidates if c[1] <= 1.5 * best_cost + 1e-12]
    dist, _, t_c, warm = min(eligible, key=lambda c: c[0])
    threshold = config.collision_distance_factor * obs.bodies[0].half_diagonal
    if dist > threshold:
        raise NoCollisionFoundError(
            f"fitted offset stays {dist:.3g} m from the plane (threshold {threshold:.3g} m)"
        )

    # phase 2: impulse active, contact pinned to the plane projection
    problem = SingleBodyProblem(obs, t_c, point, normal, config.weights, PhaseMask(), config.substep)

    def fun2(x):
        x = np.array(x, copy=True)
        x[..., lay.X_C] = project(x[..., lay.B4])
        return problem.assemble(x)

    free2 = _free_slots(lay, [lay.X_C])
    post2 = _single_body_post_step(pin_xc=True, project=project)
    result2 = levenberg_marquardt(
        fun2, warm, free2, config.max_iterations, config.tol_cost, config.tol_step, post2
    )

    free3 = _free_slots(lay, [])
    post3 = _single_body_post_step(pin_xc=False, project=project)
    result3 = levenberg_marquardt(
        problem.assemble, result2.x, free3, config.max_iterations, config.tol_cost, config.tol_step, post3
    )
    try:
        restitution = problem.compute_restitution(result3.x)
    except UndefinedRestitutionError:
        restitution = math.nan
    flags = SolveFlags(
        mass_at_bound=False,
        restitution_out_of_range=not (0.0 <= restitution <= 1.0),
        non_converged=not (result2.converged and result3.converged),
    )
    final = problem.assemble(result3.x)
    norms = {name: float(np.linalg.norm(final[sl])) for name, sl in problem.block_slices().items()}
    return SolutionRecord(
        x=result3.x,
        t_c=t_c,
        restitution=restitution,
        flags=flags,
        residual_norms=norms,
        cost=result3.cost,
        obs=obs,
        single_body=True,
        plane_point=point,
        plane_normal=normal,
    )
