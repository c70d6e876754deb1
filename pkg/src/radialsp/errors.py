"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid run parameter or precondition violation."""


class EvaluationError(RuntimeError):
    """Potential or profile evaluation produced non-finite values."""


class InsufficientDomainError(RuntimeError):
    """Fewer bound states resolvable than requested on this mesh."""

    def __init__(self, msg, found=0):
        super().__init__(msg)
        self.found = found


class SpectralStructureError(RuntimeError):
    """Computed spectrum violates Sturm ordering or simplicity."""


class ConvergenceError(RuntimeError):
    """Newton iteration failed to converge."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class SingularJacobianError(ConvergenceError):
    """Newton linearization was numerically singular."""


class BranchIntegrityError(RuntimeError):
    """Zero-crossing count changed along a continuation path."""


class MatchingError(RuntimeError):
    """Far-field matching failed (non-positive value at the matching radius)."""


class BlowUpError(RuntimeError):
    """Non-finite field detected during time stepping."""

    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


class SchemaError(ValueError):
    """Persisted file does not carry the expected schema header."""
