"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 1 for configuration
problems, 2 for domain errors, 3 for capacity limits.
"""


class SwitchseqError(Exception):
    exit_code = 2


class ConfigError(SwitchseqError):
    exit_code = 1

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(SwitchseqError, ValueError):
    exit_code = 2


class CapacityError(SwitchseqError):
    exit_code = 3


class FormatError(DomainError):
    pass


class DimensionError(DomainError):
    pass


class InvalidPermutationError(DomainError):
    pass


class MissingPolarizationError(DomainError):
    pass


class DegenerateDirectionError(DomainError):
    """A basis vector has zero norm at the requested direction."""


class RankDeficientError(DomainError):
    pass


class XPRPreconditionError(DomainError):
    pass


class DegenerateAmplitudeError(DomainError):
    pass


class SingularFIMError(DomainError):
    pass


class UndefinedEstimateError(DomainError):
    pass
