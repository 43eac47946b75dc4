"""Exception hierarchy. Each class maps to one CLI exit code."""


class SpecInferError(Exception):
    exit_code = 1


class ConfigError(SpecInferError):
    exit_code = 2


class StorageError(SpecInferError):
    """Missing or malformed input/output file."""

    exit_code = 3


class NumericalError(SpecInferError):
    exit_code = 4


class SolverError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class MetricError(NumericalError):
    pass


class PreconditionError(SpecInferError, ValueError):
    exit_code = 5


class DomainError(PreconditionError):
    """Argument outside the mathematical domain of an operation."""


class InputShapeError(PreconditionError):
    pass


class ConsistencyError(PreconditionError):
    pass
