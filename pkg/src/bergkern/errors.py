"""Exception hierarchy.

``NumericalError`` subclasses map to CLI exit code 3, ``ManifestError`` to
exit code 2.
"""


class BergkernError(Exception):
    pass


class ManifestError(BergkernError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")


class NumericalError(BergkernError):
    pass


class StepUnderflow(NumericalError):
    pass


class OutOfChart(NumericalError):
    pass


class SingularTheta(NumericalError):
    pass


class NotHermitian(NumericalError):
    pass


class NotPositive(NumericalError):
    pass


class StratumMismatch(NumericalError):
    pass


class JetOrderTooLow(NumericalError):
    pass


class NotNormalForm(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class FitDegenerate(NumericalError):
    pass


class UnsupportedFamily(NumericalError):
    pass


class MissingDims(NumericalError):
    pass


class EmptyRegimeWarning(UserWarning):
    """No eigenvalue falls in the small-|a t| regime of the degeneracy bound."""
