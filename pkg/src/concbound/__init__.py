"""Moment and tail bounds for suprema of empirical processes, with Monte Carlo checks."""
from .bounds import (
    BoundFamily,
    BoundRequest,
    BoundResult,
    Direction,
    MomentEnvelopeSpec,
    ProcessScale,
    eval_main_moment_bound,
    eval_tail_bound_chebyshev,
    evaluate,
)
from .combinatorics import c_bound, c_exact
from .errors import BudgetExceeded, ConcboundError, DomainError, UsageError
from .special import gamma

__version__ = "0.1.0"

__all__ = [
    "BoundFamily", "BoundRequest", "BoundResult", "Direction", "MomentEnvelopeSpec", "ProcessScale",
    "eval_main_moment_bound", "eval_tail_bound_chebyshev", "evaluate",
    "c_bound", "c_exact", "gamma",
    "BudgetExceeded", "ConcboundError", "DomainError", "UsageError",
]
