"""Exception hierarchy shared by every module."""


class PCQMError(Exception):
    """Base class for all package errors."""


class DomainError(PCQMError, ValueError):
    """Argument outside the mathematical domain of a function."""


class PreconditionError(PCQMError, ValueError):
    """Estimator precondition violated by the sample."""


class AllCensoredError(PreconditionError):
    """Every sector of the sample is censored."""


class NotApplicableError(PCQMError):
    """Estimator is not defined for the requested design (e.g. ell=1)."""


class DegenerateSampleError(PreconditionError):
    """Sample makes an estimator's formula singular."""


class NumericError(PCQMError, ArithmeticError):
    """Iteration failed to converge or a quantity under/overflowed."""


class OptimizationError(NumericError):
    """Optimizer failed; ``best`` holds the best point seen, if any."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(PCQMError, ValueError):
    """Invalid run or benchmark configuration."""


class IngestError(PCQMError, ValueError):
    """Malformed input file."""
