"""Exception hierarchy shared by all modules."""


class PuncturingError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PuncturingError, ValueError):
    """Invalid parameters (probabilities, proportions, dimensions ratios)."""


class DimensionError(PuncturingError, ValueError):
    """Shapes of the inputs do not agree."""


class DataError(PuncturingError, ValueError):
    """Input data contains non-finite entries or is otherwise unusable."""


class SizeError(PuncturingError, ValueError):
    """A dense guard was exceeded."""


class DomainError(PuncturingError, ValueError):
    """Argument outside the domain of a closed-form expression."""


class InputError(PuncturingError, ValueError):
    """Malformed user input (labels, population bases, files)."""


class NumericalError(PuncturingError, ArithmeticError):
    """A numerical procedure failed to produce an admissible answer."""


class BranchSelectionError(NumericalError):
    """No root of the Stieltjes cubic satisfies the branch conditions."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual
