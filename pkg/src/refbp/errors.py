"""Exception types shared across the package."""


class RefbpError(Exception):
    """Base class for all package-specific errors."""


class CollisionError(RefbpError):
    """Two interacting bodies are closer than the allowed minimum distance."""

    def __init__(self, body_a, body_b, distance, message=None):
        self.body_a = body_a
        self.body_b = body_b
        self.distance = distance
        if message is None:
            message = (
                f"bodies {body_a} and {body_b} are {distance:.3e} apart, "
                "below the collision threshold"
            )
        super().__init__(message)


class IntegrationError(RefbpError):
    """Propagation could not be completed."""


class StepUnderflowError(IntegrationError):
    """The step size collapsed, typically near a Cartesian singularity."""


class StepBudgetError(IntegrationError):
    """The step budget was exhausted before reaching the end of the span."""


class BracketingError(RefbpError):
    """A root/event target is not bracketed by the available data."""


class ConvergenceError(RefbpError):
    """An iterative solver failed to converge."""
