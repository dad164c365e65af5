"""Exception types shared across the toolkit."""


class MorphspanError(Exception):
    """Base class for all toolkit errors."""


class FormatError(MorphspanError):
    """Malformed or unsupported file contents."""


class UnsupportedGeometryError(MorphspanError):
    """Oblique or otherwise unsupported voxel geometry."""


class DegenerateInputError(MorphspanError):
    """Input too small / empty / rank-deficient for the operation."""


class MissingLandmarkError(MorphspanError):
    """A required anatomical label is absent from the label volume."""


class ConvergenceError(MorphspanError):
    """Iterative fit failed to converge; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
