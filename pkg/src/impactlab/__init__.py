"""Physically valid two-body collision reconstruction from sparse pose
annotations, plus forward simulation and scene authoring on the recovered
parameters.

Coordinate convention: the world +y axis points along gravity (bodies
accelerate toward +y at 9.81 m/s²), matching the shared-parabola gauge.
"""

from .dynamics import (
    BodyState,
    Impulse,
    angular_velocity_from_momentum,
    apply_impulse,
    cuboid_inertia,
    integrate_pose,
    momentum_from_angular_velocity,
    point_velocity,
)
from .errors import (
    ImpactLabError,
    InsufficientDataError,
    InvalidTransformError,
    NoCollisionFoundError,
    NoImpulseError,
    SchemaError,
    UndefinedRestitutionError,
)
from .observations import BodyObservations, ObservationSet
from .residuals import CollisionProblem, PhaseMask, SingleBodyProblem, UnknownLayout, Weights
from .simulator import (
    GroundTruth,
    SimScene,
    add_noise,
    detect_contact_obb,
    impulse_magnitude,
    make_drop_scene,
    make_two_body_scene,
    sample_observations,
    simulate,
)
from .solver import (
    SolutionRecord,
    SolveConfig,
    SolveFlags,
    reconstruct,
    reconstruct_single_body,
)
from .composer import (
    PlacedPair,
    SceneComposition,
    auto_time,
    export_keyframes,
    place_pair,
    predict_secondary,
)
from .trajectory import GlobalGauge, Offset, ParabolaParams, eval_parabola, eval_velocity, yxy_rotation

__version__ = "0.1.0"
