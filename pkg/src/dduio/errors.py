"""Exception hierarchy shared across the package."""


class UIOError(Exception):
    """Base class for every error raised by dduio."""


class DimensionError(UIOError, ValueError):
    """Matrix or sequence shapes are inconsistent."""


class NonFiniteError(UIOError, ValueError):
    """A NaN or infinite value reached a numerical routine."""


class TrajectoryFormatError(UIOError, ValueError):
    """A trajectory file could not be parsed.

    ``row`` and ``column`` locate the offending cell when known (1-based row
    numbers count the header as row 1).
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class AssumptionError(UIOError):
    """The data are not rich enough (state data matrix lacks full row rank)."""


class NotDetectableError(UIOError):
    """A pair (F, C) has undetectable modes, or no detectable candidate was found."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class PlacementError(UIOError):
    """Pole placement could not meet the requested spectrum."""


class InvalidUIOError(UIOError):
    """A realization does not satisfy the observer conditions for a system."""


class NoUIOError(UIOError):
    """No unknown-input observer exists; ``violated`` names the failing conditions."""

    def __init__(self, message, violated=()):
        super().__init__(message)
        self.violated = list(violated)


class RetryBudgetError(UIOError):
    """A rejection sampler ran out of attempts."""
