"""Exception hierarchy shared by every grassopt module."""


class GrassoptError(Exception):
    """Base class for all package errors."""


class DimensionError(GrassoptError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class ContractViolation(GrassoptError, ValueError):
    """An input breaks a documented precondition (tangency, base point, ...)."""


class ConfigError(GrassoptError, ValueError):
    """A configuration value is outside its admissible range."""


class NumericalError(GrassoptError, ArithmeticError):
    """Base class for failures of the numerical linear algebra."""


class SingularChannelError(NumericalError):
    """A channelized covariance failed its Cholesky factorization."""


class CovarianceError(NumericalError):
    """A full-size covariance matrix is not positive definite."""


class InsufficientSamplesError(GrassoptError, ValueError):
    """Fewer samples than an estimator needs."""


class RunError(NumericalError):
    """An optimizer run aborted; ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DivergedError(RunError):
    """The objective produced a non-finite value."""


class LineSearchStall(RunError):
    """Backtracking exhausted ``max_backtracks`` without sufficient decrease."""


class OracleFailure(RunError):
    """The gradient oracle could not produce a usable estimate."""
