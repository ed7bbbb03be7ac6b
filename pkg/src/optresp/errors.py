"""Exception types shared across the package."""


class OptrespError(Exception):
    """Base class for all package errors."""


class ConfigurationError(OptrespError):
    """Invalid user input: unknown model, bad counts, malformed config."""


class DivergedOrbitError(OptrespError):
    """A trajectory left the finite range; carries the first bad step."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"orbit diverged at step {step}")


class DegenerateFrameError(OptrespError):
    """QR renormalization hit a (numerically) rank-deficient frame."""


class TangencyError(OptrespError):
    """Stable/unstable angle collapse: a duality system became singular."""


class SolverFailureError(OptrespError):
    """A covector path failed its residual certificate."""


class NullResponseError(OptrespError):
    """Every coefficient vanished; no direction of steepest response exists."""


class CapabilityError(OptrespError):
    """A model is missing an operation required by the pipeline."""
