"""Exception types shared across the package."""


class ObsThermoError(Exception):
    """Base class for all package errors."""


class ValidationError(ObsThermoError, ValueError):
    """Malformed input: wrong shape, dimension mismatch, bad configuration."""


class NotHermitianError(ValidationError):
    pass


class RankDeficientError(ObsThermoError, ArithmeticError):
    pass


class NumericalError(ObsThermoError, ArithmeticError):
    """A numerical quantity left its admissible range (PSD violation, divergence)."""


class PSDViolationError(NumericalError):
    pass


class OptimizerDivergedError(NumericalError):
    pass
