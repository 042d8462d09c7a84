"""Shared exception types."""


class SoficmixError(Exception):
    """Base class for all library errors."""


class ValidationError(SoficmixError, ValueError):
    """Invalid argument, contract violation, or malformed input file."""


class PresentationMismatchError(ValidationError):
    """Operands belong to different group presentations."""


class BudgetExceededError(SoficmixError):
    """A word was evaluated beyond the stored radius budget."""


class CapExceededError(SoficmixError):
    """A resource guard (ball size, enumeration count, sample budget) was hit."""


class MissingPatternError(SoficmixError, KeyError):
    """An observable table has no entry for an input pattern."""


class ScheduleError(SoficmixError):
    """No feasible path length satisfies the requested thresholds."""
