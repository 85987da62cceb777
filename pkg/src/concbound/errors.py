"""Exception types shared across the package."""


class ConcboundError(Exception):
    pass


class DomainError(ConcboundError, ValueError):
    """A parameter lies outside the range where a bound or model is defined."""


class UsageError(ConcboundError, ValueError):
    """Malformed configuration or request (bad key, missing field, too few replications)."""


class BudgetExceeded(ConcboundError, RuntimeError):
    """An exhaustive computation would exceed its enumeration budget."""
