"""Exception types raised by the qpj numerics."""


class QpjError(Exception):
    """Base class for all library errors."""


class QuadratureNotConverged(QpjError):
    pass


class TemperatureMismatch(QpjError):
    pass


class OutOfTableRange(QpjError):
    pass


class TruncationWarning(UserWarning):
    pass


class ResonanceNotFound(QpjError):
    pass


class NoSignChange(QpjError):
    def __init__(self, message, bracket=None, powers=None):
        super().__init__(message)
        self.bracket = bracket
        self.powers = powers


class NotPositiveSemidefinite(QpjError):
    pass


class KernelNotCausal(QpjError):
    pass


class UnstableStep(QpjError):
    pass


class InsufficientStatistics(QpjError):
    pass


class ConfigError(QpjError):
    """Raised for malformed configuration files (parse errors)."""


class ValidationError(QpjError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


ParseError = ConfigError
