"""Counting tuples in which every entry's value repeats.

C(m, n) is the number of tuples in {1..n}^m such that each position shares
its value with at least one other position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, DomainError

ENUMERATION_BUDGET_BITS = 24
_BLOCK = 1 << 18


@dataclass(frozen=True)
class TupleCount:
    m: int
    n: int
    exact: int | None
    bound: float

    def within_bound(self):
        return self.exact is None or self.exact <= self.bound


def _positive_int(name, v):
    if isinstance(v, bool) or int(v) != v or v < 1:
        raise DomainError(f"{name} must be a positive integer, got {v!r}")
    return int(v)


def c_exact(m, n):
    """Exact C(m, n) by exhaustive enumeration of all n^m tuples.

    Limited to m * log2(n) <= 24; larger instances raise BudgetExceeded
    (use :func:`c_bound` there).
    """
    m = _positive_int("m", m)
    n = _positive_int("n", n)
    if m * math.log2(n) > ENUMERATION_BUDGET_BITS:
        raise BudgetExceeded(
            f"enumerating {n}^{m} tuples exceeds the 2^{ENUMERATION_BUDGET_BITS} budget; use c_bound")
    if m == 1:
        return 0
    if n == 1:
        return 1
    total = n ** m
    powers = n ** np.arange(m, dtype=np.int64)
    count = 0
    for start in range(0, total, _BLOCK):
        codes = np.arange(start, min(start + _BLOCK, total), dtype=np.int64)
        digits = (codes[:, None] // powers[None, :]) % n
        # occurrences of each value per tuple
        occ = np.zeros((codes.size, n), dtype=np.int16)
        rows = np.arange(codes.size)
        for pos in range(m):
            # each row appears once per position, so plain fancy-index += is safe
            occ[rows, digits[:, pos]] += 1
        count += int(np.count_nonzero(~(occ == 1).any(axis=1)))
    return count


def c_bound(m, n):
    """m! (n/2)^floor(m/2)."""
    m = _positive_int("m", m)
    n = _positive_int("n", n)
    return math.factorial(m) * (n / 2.0) ** (m // 2)


def tuple_count(m, n):
    """TupleCount record; ``exact`` is None when enumeration is over budget."""
    try:
        exact = c_exact(m, n)
    except BudgetExceeded:
        exact = None
    return TupleCount(m=int(m), n=int(n), exact=exact, bound=c_bound(m, n))


def count_table(m_max, n_max):
    return [tuple_count(m, n) for m in range(1, m_max + 1) for n in range(1, n_max + 1)]
