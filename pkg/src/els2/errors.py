"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration: bad keys, bad values, or unusable grid sizes."""


class GridMismatchError(ValueError):
    """Fields from different grids were combined."""


class InvalidCoefficientsError(ValueError):
    """Leslie coefficients violate the admissibility constraints."""


class ConstraintError(ValueError):
    """Algebraic input constraints (unit norm, orthogonality, symmetry) violated."""


class DegeneracyError(RuntimeError):
    """Director magnitude collapsed below the renormalization threshold.

    Carries the last valid state so the caller can snapshot it.
    """

    def __init__(self, message, state=None, min_norm=None):
        super().__init__(message)
        self.state = state
        self.min_norm = min_norm


class BlowupError(RuntimeError):
    """Non-finite values appeared during time stepping."""


class CheckpointError(IOError):
    """Checkpoint file is malformed; `offset` points at the offending bytes."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class InsufficientDataError(ValueError):
    """A post-processing routine received too few samples."""


class NotConvergedError(ValueError):
    """A series required to be settled is still drifting."""
