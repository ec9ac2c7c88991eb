"""Domain-specific exceptions.

Plain argument validation raises ValueError; the classes below mark
conditions a caller may want to branch on (CLI exit codes, service
responses, batch harness bookkeeping).
"""


class ImpactLabError(Exception):
    """Base class for recoverable domain errors."""


class InsufficientDataError(ImpactLabError):
    """Fewer than two observations on one side of the collision for a body."""


class NoCollisionFoundError(ImpactLabError):
    """No candidate segment produced trajectories that approach each other."""


class NoImpulseError(ImpactLabError):
    """Contact state is separating; no collision impulse is defined."""


class UndefinedRestitutionError(ImpactLabError):
    """Degenerate collision normal or zero approach velocity."""


class InvalidTransformError(ImpactLabError):
    """Requested placement transform is outside the gauge-preserving group."""


class SchemaError(ImpactLabError):
    """A document failed validation; message carries the offending path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
