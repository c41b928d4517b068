"""Exception hierarchy shared by the library and the CLI."""


class FracDynError(Exception):
    """Base class for every error raised by fracdyn."""


class DomainError(FracDynError, ValueError):
    """A parameter lies outside its admissible range."""


class ParameterError(FracDynError, ValueError):
    """A model or benchmark parameter is invalid."""


class HistoryLengthError(FracDynError, ValueError):
    """A history is longer than the coefficient table that weights it."""


class SimulationDiverged(FracDynError, ArithmeticError):
    """A simulated state became non-finite.

    Attributes
    ----------
    step : int
        Index ``k`` of the state that could not be computed.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}")


class DatasetError(FracDynError):
    """Dataset generation failed for one experiment trial."""

    def __init__(self, trial, cause):
        self.trial = trial
        self.cause = cause
        super().__init__(f"trial (i={trial[0]}, j={trial[1]}) failed: {cause}")


class InsufficientExcitation(FracDynError):
    """Every sample of some state component was excluded from order estimation."""


class InconsistentData(FracDynError):
    """Recorded data admit no real fractional order."""


class IllPosedRegression(FracDynError):
    """The regression matrix is rank deficient."""

    def __init__(self, message, condition=float("inf")):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class UsageError(FracDynError, ValueError):
    """An operation was called with incompatible arguments."""
