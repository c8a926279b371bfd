"""Exception taxonomy shared across the package.

Configuration/validation problems and numerical failures are kept apart so
the command-line layer can map them to distinct exit codes.
"""


class JumpResponseError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(JumpResponseError, ValueError):
    """Bad user input: config files, CLI arguments, malformed data files."""


class DimensionMismatchError(ValidationError):
    """Array shapes or dimensions that do not line up."""


class NotSPDError(ValidationError):
    """A matrix required to be symmetric positive definite is not."""


class SingularMapError(ValidationError):
    """An affine jump map whose linear part I + H is (numerically) singular."""


class BlowupError(JumpResponseError, RuntimeError):
    """A simulated path left the representable range (NaN/Inf)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class EstimatorError(JumpResponseError, RuntimeError):
    """A statistical estimator could not produce a trustworthy result."""
