"""Exception hierarchy shared by the library and the command line front end."""


class PlanarSqError(Exception):
    """Base class for all errors raised by planarsq."""


class DimensionMismatchError(PlanarSqError, ValueError):
    pass


class ZeroPolarizationError(PlanarSqError, ValueError):
    """The in-plane polarization vanishes, so the requested quantity is undefined."""


class EigenSolverError(PlanarSqError, ArithmeticError):
    """The eigensolver did not reach the requested residual.

    The attained residual is kept on the exception so callers can decide
    whether to relax the tolerance.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(PlanarSqError, ArithmeticError):
    pass


class CurveRangeError(PlanarSqError, ValueError):
    """Evaluation point outside the sampled range of a bound curve."""


class MissingTableEntryError(PlanarSqError, KeyError):
    pass


class UnphysicalMomentsError(PlanarSqError, ValueError):
    pass


class BlindSpotError(PlanarSqError, ZeroDivisionError):
    """The phase derivative of the signal vanishes; sensitivity is infinite."""


class RankDeficientError(PlanarSqError, ValueError):
    pass


class SingularCovarianceError(PlanarSqError, ValueError):
    pass


class SchemaError(PlanarSqError, ValueError):
    """Input file does not match the documented schema."""
