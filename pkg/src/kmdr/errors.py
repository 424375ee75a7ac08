"""Exception hierarchy shared by all kmdr modules.

Input problems (bad files, bad columns, invalid values) and numerical
problems (non-convergence, singular matrices) are kept on separate branches
so the CLI can map them to distinct exit codes.
"""


class KmdrError(Exception):
    """Base class for all errors raised by this package."""


class InputError(KmdrError):
    """Invalid user input: files, schemas, values, argument combinations."""


class SchemaError(InputError):
    """A required column is missing or the file layout is wrong."""


class DataValidationError(InputError):
    """A value inside an otherwise well-formed file violates its contract."""


class EmptyInputError(InputError):
    """The input contains no observations."""


class DegenerateGridError(InputError):
    """No threshold survives trimming (e.g. all probability mass at one point)."""


class NumericalError(KmdrError):
    """Estimation failed for numerical reasons."""


class FitFailedError(NumericalError):
    """Every threshold fit failed; there is no usable coefficient path."""


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is singular (collinear design, flat curvature)."""
