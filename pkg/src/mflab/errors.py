"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class for all errors raised by mflab."""


class ParameterError(LabError, ValueError):
    """Invalid parameter value (nonpositive scale, bad order, ...)."""


class DomainError(ParameterError):
    """Argument outside the domain where a formula is defined."""


class ShapeError(LabError, ValueError):
    """Mismatched dimensions between inputs."""


class EmptyTruncationError(LabError):
    """Truncation removed all mass."""


class CapacityError(LabError):
    """Requested construction exceeds the memory guard."""


class CertificateError(LabError):
    """A Lipschitz or covering certificate failed."""


class ConsistencyError(LabError):
    """Internal invariant violated; indicates a bug or corrupted input."""


class ConfigError(LabError):
    """Invalid simulation or experiment configuration."""


class OffGridError(LabError, KeyError):
    """Requested time is not on the saved grid."""

    def __str__(self):
        return str(self.args[0]) if self.args else "off-grid time"


class DivergenceError(LabError):
    """Non-finite state encountered during time stepping."""

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"non-finite state at step {self.step}")


class DomainTooSmallError(LabError):
    """Mass reached the boundary of the computational domain."""


class SolverError(LabError):
    """Numerical solver failed to converge."""


class CheckRefusedError(LabError):
    """A diagnostic was asked to run outside its hypotheses.

    ``tag`` names the failed hypothesis, e.g. ``"not-uniformly-convex"``.
    """

    def __init__(self, tag, message=None):
        self.tag = str(tag)
        super().__init__(message or f"check refused: {self.tag}")
