"""Exception hierarchy shared by every module of the package."""


class SymrewriteError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SymrewriteError, ValueError):
    """A grammar, distribution, or training configuration is infeasible."""


class InvalidTokenError(SymrewriteError, ValueError):
    """A token id does not belong to the vocabulary it was used with."""


class ParseError(SymrewriteError, ValueError):
    """A grammar, dataset, or checkpoint file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CompatibilityError(SymrewriteError):
    """An artifact was produced for a different grammar or configuration."""


class ShapeError(SymrewriteError, ValueError):
    """Operands of a tensor op have incompatible shapes."""


class NumericError(SymrewriteError, ArithmeticError):
    """A computation produced NaN or infinity."""


class TrainingFailure(SymrewriteError):
    """Training diverged; carries where it happened."""

    def __init__(self, message: str, epoch: int, step: int):
        self.epoch = epoch
        self.step = step
        super().__init__(f"epoch {epoch}, step {step}: {message}")


class InsufficientDataError(SymrewriteError, ValueError):
    """Too few results to compute a statistic."""


class UndefinedCorrelationError(SymrewriteError, ValueError):
    """Correlation requested for a constant column."""
