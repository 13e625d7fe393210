"""
Exceptions raised by the stap_codesign package.

Validation errors (bad scenario files, unknown solver names) derive from
ValidationException; everything else is a numerical failure.
"""


class StapCodesignException(Exception):
    """
    Base class for every error raised by this package.
    """
    pass


class ValidationException(StapCodesignException):
    """
    Raised when user supplied input cannot be accepted.
    """
    pass


class ScenarioParseException(ValidationException):
    """
    Raised when a scenario file is empty or is not a valid JSON document.
    """
    pass


class ScenarioValidationException(ValidationException):
    """
    Raised when a scenario breaks one of its invariants.
    """

    def __init__(self, field: str, message: str):
        """
        :param field: Name of the offending scenario field.
        :param message: Human readable description.
        """
        super().__init__("Invalid scenario field '{}': {}".format(field, message))
        self.field = field


class UnsupportedSolverException(ValidationException):
    """
    Raised when a non supported solver kind or multiplier mode is requested.
    """
    pass


class NotHermitianException(StapCodesignException):
    """
    Raised when a matrix expected to be Hermitian is not.
    """
    pass


class NotPSDException(StapCodesignException):
    """
    Raised when a matrix expected to be positive semidefinite has a negative eigenvalue.
    """
    pass


class ZeroVectorException(StapCodesignException):
    """
    Raised when a projector is requested for a (numerically) zero vector.
    """
    pass


class NoSignChangeException(StapCodesignException):
    """
    Raised when a root bracket cannot be established.
    """
    pass


class SingularCovarianceException(StapCodesignException):
    """
    Raised when the linear solve against the interference covariance fails.
    """
    pass


class ZeroSteeringException(StapCodesignException):
    """
    Raised when a steering vector (G s or G^H w) vanishes.
    """
    pass


class SingularHessianException(StapCodesignException):
    """
    Raised when the zero-multiplier update needs the inverse of a singular waveform Hessian.
    """
    pass


class InfeasibleException(StapCodesignException):
    """
    Raised when the Capon and power constraints cannot hold together (kappa^2/||y||^2 > P_o).
    """
    pass


class NumericalFailureException(StapCodesignException):
    """
    Raised when an evaluation produces non finite values.
    """
    pass


class ZeroWaveformException(StapCodesignException):
    """
    Raised when a waveform of zero norm is rescaled.
    """
    pass


class TraceIOException(StapCodesignException):
    """
    Raised when a trace or table cannot be written.
    """
    pass


class IterationException(StapCodesignException):
    """
    Wraps a solver error with the alternating minimization iteration where it happened.
    """

    def __init__(self, iteration: int, cause: Exception):
        """
        :param iteration: Iteration index (1 based for waveform steps, 0 for initialization).
        :param cause: The original error.
        """
        super().__init__("Iteration {}: {}".format(iteration, cause))
        self.iteration = iteration
        self.cause = cause
