"""Exception hierarchy.

Every error raised by the package derives from :class:`TumorFEMError`; the CLI
maps the three families below onto its exit codes.
"""


class TumorFEMError(Exception):
    """Base class for all package errors."""


class ValidationError(TumorFEMError, ValueError):
    """Bad input: parameters, meshes, coefficients, configuration."""


class NumericalError(TumorFEMError, ArithmeticError):
    """A solve or step failed numerically."""


class InvalidResolution(ValidationError):
    pass


class InvalidDomain(ValidationError):
    pass


class InvalidParameter(ValidationError):
    pass


class HypothesisViolation(ValidationError):
    pass


class InvalidTensor(ValidationError):
    pass


class KindMismatch(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class InvalidOperator(ValidationError):
    pass


class StabilityViolation(ValidationError):
    pass


class UnknownPreset(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class NumericalBreakdown(NumericalError):
    pass


class StepFailure(NumericalError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class OracleFailure(NumericalError):
    pass


class OutputError(TumorFEMError, OSError):
    pass
