"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (used by the CLI's
``ERROR <code> <detail>`` records) and the process exit status the CLI maps
it to.
"""


class SpatialQuditError(Exception):
    code = "Error"
    exit_status = 1


class ValidationError(SpatialQuditError, ValueError):
    code = "ValidationError"


# -- states and observables -------------------------------------------------
class NotHermitian(ValidationError):
    code = "NotHermitian"


class TraceNotOne(ValidationError):
    code = "TraceNotOne"


class NotPositive(ValidationError):
    code = "NotPositive"


class NotNormalized(ValidationError):
    code = "NotNormalized"


class WrongDimension(ValidationError):
    code = "WrongDimension"


class DimensionMismatch(ValidationError):
    code = "DimensionMismatch"


# -- optics -----------------------------------------------------------------
class GeometryError(ValidationError):
    code = "GeometryError"


class OutOfRange(ValidationError):
    code = "OutOfRange"


class ImagePlaneSingular(OutOfRange):
    code = "ImagePlaneSingular"


class DarkPoint(SpatialQuditError):
    code = "DarkPoint"


class NegativeDensity(SpatialQuditError):
    code = "NegativeDensity"


class NotOrthogonal(ValidationError):
    code = "NotOrthogonal"


class NotComplete(SpatialQuditError):
    code = "NotComplete"


# -- POVM -------------------------------------------------------------------
class ImpossibleOutcome(SpatialQuditError):
    code = "ImpossibleOutcome"
    exit_status = 2


class AllZero(SpatialQuditError):
    code = "AllZero"


class UnbalancedDetectionPoint(ValidationError):
    """The fixed detection point does not see all slits with equal amplitude."""

    code = "UnbalancedDetectionPoint"


# -- planning ---------------------------------------------------------------
class SearchFailed(SpatialQuditError):
    code = "SearchFailed"
    exit_status = 2

    def __init__(self, message, best_fidelities=(), best_z=None, best_positions=()):
        super().__init__(message)
        self.best_fidelities = tuple(best_fidelities)
        self.best_z = best_z
        self.best_positions = tuple(best_positions)


# -- Monte Carlo ------------------------------------------------------------
class ClickProbabilityOverflow(ValidationError):
    code = "ClickProbabilityOverflow"


class NoCounts(SpatialQuditError):
    code = "NoCounts"


class PlanMismatch(ValidationError):
    code = "PlanMismatch"


# -- configuration ----------------------------------------------------------
class ParseError(ValidationError):
    code = "ParseError"
