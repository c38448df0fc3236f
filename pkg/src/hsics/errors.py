"""Exception hierarchy.

Validation problems (bad shapes, bad parameters, malformed files) derive from
``ValidationError``; failures of an algorithm on otherwise valid input derive
from ``NumericalError``. The CLI maps the two families to exit codes 1 and 2.
"""


class HsicsError(Exception):
    """Base class for all package errors."""


class ValidationError(HsicsError, ValueError):
    pass


class DimensionError(ValidationError):
    pass


class ZeroColumnError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    pass


class TrainTestOverlapError(ValidationError):
    """A test set shares pixels with the training set of the dictionary."""


class EnviError(ValidationError):
    """Malformed or unsupported ENVI raster."""


class MissingKeyError(EnviError):
    pass


class UnsupportedInterleaveError(EnviError):
    pass


class UnsupportedDataTypeError(EnviError):
    pass


class SizeMismatchError(EnviError):
    """Binary file length disagrees with the header geometry."""


class NumericalError(HsicsError, ArithmeticError):
    pass


class SvdConvergenceError(NumericalError):
    pass


class InfeasibleError(NumericalError):
    """The residual bound is below the distance from y to range(A)."""


class NearSingularError(NumericalError):
    pass
