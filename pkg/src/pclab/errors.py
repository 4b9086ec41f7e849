"""Exception hierarchy. Each error carries a machine-readable code and a CLI exit status."""


class PclabError(Exception):
    code = "error"
    exit_status = 1


class ValidationError(PclabError, ValueError):
    code = "validation_error"
    exit_status = 2


class DegenerateCone(ValidationError):
    code = "degenerate_cone"


class UnsupportedDimension(ValidationError):
    code = "unsupported_dimension"


class OutsideCap(ValidationError):
    code = "outside_cap"


class NotInCone(ValidationError):
    code = "not_in_cone"


class ConeMismatch(ValidationError):
    code = "cone_mismatch"


class ExponentOutOfRange(ValidationError):
    code = "exponent_out_of_range"


class GradientUnavailable(ValidationError):
    code = "gradient_unavailable"


class EmptyWulff(ValidationError):
    code = "empty_wulff"


class UnknownCase(ValidationError):
    code = "unknown_case"


class DivergenceError(PclabError, ArithmeticError):
    code = "divergence"
    exit_status = 3


class NumericDivergence(DivergenceError):
    code = "numeric_divergence"


class SingularAtOrigin(DivergenceError):
    code = "singular_at_origin"


class DivergentMeasure(DivergenceError):
    code = "divergent_measure"


class InconclusiveFit(PclabError, ArithmeticError):
    code = "inconclusive_fit"


class NotConverged(PclabError, RuntimeError):
    code = "not_converged"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
