"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class UHDError(Exception):
    exit_code = 1


class DomainError(UHDError, ValueError):
    """Input outside the mathematical or physical domain of an operation."""

    exit_code = 2


class ShapeError(UHDError, ValueError):
    exit_code = 2


class ConfigError(DomainError):
    """Invalid configuration; ``path`` is the dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConditioningError(UHDError, ArithmeticError):
    exit_code = 3


class AccuracyError(UHDError, ArithmeticError):
    """A numerical transform failed its own convergence check."""

    exit_code = 3


class EstimationError(UHDError, RuntimeError):
    exit_code = 3


class FormatError(UHDError, OSError):
    exit_code = 4
