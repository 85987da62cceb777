"""Closed-form moment and tail bounds for Z = max_j |P_n Z(j)|.

Every evaluator is a pure function of its arguments. Moment bounds bound
E[(Z - threshold)_+^l] for the stated threshold; tail bounds are
probabilities and are clipped to 1 with the unclipped value kept in
``BoundResult.raw_value``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .special import gamma

__all__ = [
    "Direction",
    "BoundFamily",
    "MomentEnvelopeSpec",
    "ProcessScale",
    "BoundRequest",
    "BoundResult",
    "TruncationBias",
    "main_coefficients",
    "eval_main_moment_bound",
    "eval_tail_bound_chebyshev",
    "eval_truncated_moment_bound",
    "eval_symmetrization_bound",
    "eval_finite_class_bound",
    "eval_bounded_part_bound",
    "eval_truncation_bias",
    "eval_expected_sup_bound",
    "eval_classical_tail",
    "evaluate",
    "gamma",
]


class Direction(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


class BoundFamily(str, enum.Enum):
    MAIN_UPPER = "MainUpper"
    MAIN_LOWER = "MainLower"
    CHEBYSHEV_UPPER = "ChebyshevUpper"
    CHEBYSHEV_LOWER = "ChebyshevLower"
    TRUNCATED_UPPER = "TruncatedUpper"
    TRUNCATED_LOWER = "TruncatedLower"
    SYMMETRIZATION = "Symmetrization"
    FINITE_CLASS = "FiniteClass"
    FINITE_CLASS_GENERAL = "FiniteClassGeneral"
    BOUNDED_PART = "BoundedPart"
    TRUNCATION_BIAS = "TruncationBias"
    EXPECTED_SUP = "ExpectedSup"
    BOUSQUET = "Bousquet"
    BERNSTEIN_CLASS = "BernsteinClass"


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class MomentEnvelopeSpec:
    """Envelope moment assumption E[envelope_i^p] <= M^p."""

    p: float
    M: float

    def __post_init__(self):
        p = _finite("p", self.p)
        M = _finite("M", self.M)
        if p < 1.0:
            raise DomainError(f"p >= 1 violated (p={p!r})")
        if M < 0.0:
            raise DomainError(f"M >= 0 violated (M={M!r})")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "M", M)


@dataclass(frozen=True)
class ProcessScale:
    """Sample size n, class size N, and the coordinate scales sigma >= sigma_trunc."""

    n: int
    N: int = 1
    sigma: float = 0.0
    sigma_trunc: float | None = None

    def __post_init__(self):
        for name in ("n", "N"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise DomainError(f"{name} must be an integer, got {v!r}")
            if v < 1:
                raise DomainError(f"{name} >= 1 violated ({name}={v!r})")
            object.__setattr__(self, name, int(v))
        sigma = _finite("sigma", self.sigma)
        if sigma < 0:
            raise DomainError(f"sigma >= 0 violated (sigma={sigma!r})")
        object.__setattr__(self, "sigma", sigma)
        st = sigma if self.sigma_trunc is None else _finite("sigma_trunc", self.sigma_trunc)
        if not 0.0 <= st <= sigma:
            raise DomainError(f"0 <= sigma_trunc <= sigma violated (sigma_trunc={st!r}, sigma={sigma!r})")
        object.__setattr__(self, "sigma_trunc", st)


@dataclass(frozen=True)
class BoundRequest:
    family: BoundFamily
    l: float | None = None
    eps: float | None = None
    K: float | None = None
    A: float | None = None
    x: float | None = None
    # Bousquet only: E[Y]; its variance proxy is taken from ProcessScale.sigma
    mean: float | None = None


@dataclass(frozen=True)
class BoundResult:
    value: float
    family: BoundFamily
    params: dict = field(default_factory=dict)
    threshold: float | None = None
    raw_value: float | None = None
    notes: dict = field(default_factory=dict)


class TruncationBias(NamedTuple):
    stated: float
    proof_derived: float


def _direction(direction):
    try:
        return Direction(direction)
    except ValueError:
        raise DomainError(f"direction must be 'upper' or 'lower', got {direction!r}") from None


def _check_l_range(l, spec):
    l = _finite("l", l)
    if not 1.0 <= l <= spec.p:
        raise DomainError(f"1 <= l <= p violated (l={l!r}, p={spec.p!r})")
    return l


def _check_eps(direction, eps):
    eps = _finite("eps", eps)
    if direction is Direction.UPPER:
        if not eps > 0:
            raise DomainError(f"eps > 0 violated (eps={eps!r})")
    elif not 0 < eps <= 1:
        raise DomainError(f"eps in (0, 1] violated (eps={eps!r})")
    return eps


def _integer_l(l):
    lf = _finite("l", l)
    if not lf.is_integer():
        raise DomainError(f"l must be a natural number, got {l!r}")
    if lf < 1:
        raise DomainError(f"l >= 1 violated (l={l!r})")
    return int(lf)


def main_coefficients(direction, l, eps):
    """Return (envelope coefficient, sigma coefficient) of the main bound.

    The bound is (env * M / n^(1 - l/p) + sig * sigma / sqrt(n))^l.
    """
    direction = _direction(direction)
    if direction is Direction.UPPER:
        return (64.0 / eps + 7.0 + eps) * l, 4.0 * math.sqrt(l)
    return (86.4 / eps + 7.0 - eps) * l, 4.7 * math.sqrt(l)


def _main_value(direction, l, eps, p, M, sigma, n):
    env, sig = main_coefficients(direction, l, eps)
    return (env * M / n ** (1.0 - l / p) + sig * sigma / math.sqrt(n)) ** l


def eval_main_moment_bound(direction, l, eps, spec: MomentEnvelopeSpec, scale: ProcessScale) -> BoundResult:
    """Bound on E[Z - (1+eps) E Z]_+^l (upper) or E[(1-eps) E Z - Z]_+^l (lower)."""
    direction = _direction(direction)
    l = _check_l_range(l, spec)
    eps = _check_eps(direction, eps)
    value = _main_value(direction, l, eps, spec.p, spec.M, scale.sigma, scale.n)
    family = BoundFamily.MAIN_UPPER if direction is Direction.UPPER else BoundFamily.MAIN_LOWER
    factor = "(1+eps)" if direction is Direction.UPPER else "(1-eps)"
    return BoundResult(
        value=value,
        family=family,
        params=dict(direction=direction.value, l=l, eps=eps, p=spec.p, M=spec.M, n=scale.n, N=scale.N, sigma=scale.sigma),
        notes={"deviation": f"{factor}*E[Z]"},
    )


def _golden_min(f, a, b, tol=1e-12, maxiter=200):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def eval_tail_bound_chebyshev(direction, x, eps, spec: MomentEnvelopeSpec, scale: ProcessScale,
                              step=1e-3, refine=True):
    """Chebyshev tail bound min_{1<=l<=p} bound(l) / x^l, capped at 1.

    The minimum is located on a grid of the given step and then polished by
    golden-section search between the neighbours of the best grid point.
    Returns ``(BoundResult, l_star)``.
    """
    direction = _direction(direction)
    x = _finite("x", x)
    if not x > 0:
        raise DomainError(f"x > 0 violated (x={x!r})")
    eps = _check_eps(direction, eps)
    p, M, sigma, n = spec.p, spec.M, scale.sigma, scale.n

    def ratio(l):
        return _main_value(direction, l, eps, p, M, sigma, n) / x ** l

    def log_ratio(l):
        env, sig = main_coefficients(direction, l, eps)
        base = env * M / n ** (1.0 - l / p) + sig * sigma / math.sqrt(n)
        return -math.inf if base == 0.0 else l * (math.log(base) - math.log(x))

    count = max(2, int(math.ceil((p - 1.0) / step)) + 1)
    grid = np.linspace(1.0, p, count) if p > 1.0 else np.array([1.0])
    env1, sig1 = main_coefficients(direction, 1.0, eps)
    # vectorized screen in log space; final values are always recomputed by ratio()
    with np.errstate(divide="ignore"):
        base = (env1 * grid * M / n ** (1.0 - grid / p)
                + (sig1 * np.sqrt(grid)) * sigma / math.sqrt(n))
        logs = grid * (np.log(base) - math.log(x))
    k = int(np.argmin(logs))
    candidates = [1.0, p, float(grid[k])]
    if refine and p > 1.0 and math.isfinite(logs[k]):
        lo = float(grid[max(k - 1, 0)])
        hi = float(grid[min(k + 1, len(grid) - 1)])
        l_ref, _ = _golden_min(log_ratio, lo, hi)
        candidates.append(l_ref)
    values = [(ratio(l), l) for l in candidates]
    raw, l_star = min(values, key=lambda t: (t[0], t[1]))
    family = BoundFamily.CHEBYSHEV_UPPER if direction is Direction.UPPER else BoundFamily.CHEBYSHEV_LOWER
    result = BoundResult(
        value=min(raw, 1.0),
        family=family,
        params=dict(direction=direction.value, x=x, eps=eps, p=p, M=M, n=n, N=scale.N, sigma=sigma),
        raw_value=raw,
        notes={"l_star": l_star,
               "event": "Z >= (1+eps)E[Z] + x" if direction is Direction.UPPER else "Z <= (1-eps)E[Z] - x"},
    )
    return result, l_star


def eval_truncated_moment_bound(direction, l, eps, K, spec: MomentEnvelopeSpec, scale: ProcessScale) -> BoundResult:
    """Bound for the truncated problem at level K.

    Controls E[Z - (1+eps) E Z_lower]_+^l (or the lower analogue), where Z_lower
    keeps only observations whose envelope is at most K. Uses sigma_trunc.
    """
    direction = _direction(direction)
    l = _check_l_range(l, spec)
    eps = _check_eps(direction, eps)
    K = _finite("K", K)
    if not K > 0:
        raise DomainError(f"K > 0 violated (K={K!r})")
    p, M, n = spec.p, spec.M, scale.n
    if direction is Direction.UPPER:
        c, s = 64.0 / eps + 5.0, 4.0
    else:
        c, s = 86.4 / eps + 5.0, 4.7
    # M^(p/l) / K^(p/l-1), written to stay finite for tiny M and K
    tail = M * (M / K) ** (p / l - 1.0)
    value = (c * l * K / n + s * math.sqrt(l) * scale.sigma_trunc / math.sqrt(n) + tail) ** l
    family = BoundFamily.TRUNCATED_UPPER if direction is Direction.UPPER else BoundFamily.TRUNCATED_LOWER
    return BoundResult(
        value=value,
        family=family,
        params=dict(direction=direction.value, l=l, eps=eps, K=K, p=p, M=M, n=n, N=scale.N,
                    sigma=scale.sigma, sigma_trunc=scale.sigma_trunc),
        notes={"deviation": ("(1+eps)" if direction is Direction.UPPER else "(1-eps)") + "*E[Z_lower]"},
    )


def eval_symmetrization_bound(l, spec: MomentEnvelopeSpec, scale: ProcessScale) -> BoundResult:
    """l Gamma(l/2) (32/n)^(l/2) M^l, bounding E[Z - 4 E Z]_+^l for centered vectors."""
    l = _finite("l", l)
    if l < 1:
        raise DomainError(f"l >= 1 violated (l={l!r})")
    if spec.p < l:
        raise DomainError(f"p >= l violated (l={l!r}, p={spec.p!r})")
    value = l * gamma(l / 2.0) * (32.0 / scale.n) ** (l / 2.0) * spec.M ** l
    return BoundResult(
        value=value,
        family=BoundFamily.SYMMETRIZATION,
        params=dict(l=l, p=spec.p, M=spec.M, n=scale.n, N=scale.N),
        notes={"deviation": "4*E[Z]", "requires_centered": True},
    )


def eval_finite_class_bound(l, spec: MomentEnvelopeSpec, scale: ProcessScale, A=None) -> BoundResult:
    """Deviation bound for finitely many centered vectors, natural l.

    Without A this is (35 l^2 / n)^(l/2) M^l above 2 M log(2N) / sqrt(n).
    With A >= 2 it is the general form above A M log(2N) / n; A = 2 sqrt(n)
    recovers the closed form up to its rounded constant.
    """
    l = _integer_l(l)
    if spec.p < 2:
        raise DomainError(f"p >= 2 violated (p={spec.p!r})")
    if spec.p < l:
        raise DomainError(f"p >= l violated (l={l!r}, p={spec.p!r})")
    n, N, M, p = scale.n, scale.N, spec.M, spec.p
    if A is None:
        value = (35.0 * l * l / n) ** (l / 2.0) * M ** l
        threshold = 2.0 * M * math.log(2 * N) / math.sqrt(n)
        family = BoundFamily.FINITE_CLASS
    else:
        A = _finite("A", A)
        if A < 2:
            raise DomainError(f"A >= 2 violated (A={A!r})")
        inner = (2.0 * (2.0 / A) ** (p - 1.0) + math.factorial(l) ** (1.0 / l) * math.sqrt(2.0 / n)
                 + 1.0 / A + l * A / n)
        value = inner ** l * M ** l
        threshold = A * M * math.log(2 * N) / n
        family = BoundFamily.FINITE_CLASS_GENERAL
    return BoundResult(
        value=value,
        family=family,
        params=dict(l=l, A=A, p=p, M=M, n=n, N=N),
        threshold=threshold,
        notes={"requires_centered": True},
    )


def eval_bounded_part_bound(l, A, spec: MomentEnvelopeSpec, scale: ProcessScale) -> BoundResult:
    """(M/A + l A M / n)^l for the part truncated at K = A/2 + sqrt(A^2/4 - 1)."""
    l = _integer_l(l)
    if spec.p < 2:
        raise DomainError(f"p >= 2 violated (p={spec.p!r})")
    A = _finite("A", A)
    if A < 2:
        raise DomainError(f"A >= 2 violated (A={A!r})")
    M, n, N = spec.M, scale.n, scale.N
    K = A / 2.0 + math.sqrt(A * A / 4.0 - 1.0)
    value = (M / A + l * A * M / n) ** l
    return BoundResult(
        value=value,
        family=BoundFamily.BOUNDED_PART,
        params=dict(l=l, A=A, p=spec.p, M=M, n=n, N=N),
        threshold=A * M * math.log(N) / n,
        notes={"K": K},
    )


def eval_truncation_bias(l, spec: MomentEnvelopeSpec, scale: ProcessScale) -> TruncationBias:
    """Both versions of the bound on |E[Z_lower - Z]| at K = n^(l/p) M.

    ``stated`` is M / n^(l(1-1/p)); ``proof_derived`` is M / n^(1-l/p), which
    is what the l-th moment Hoelder step delivers. They agree at l = 1.
    """
    l = _check_l_range(l, spec)
    n, M, p = scale.n, spec.M, spec.p
    return TruncationBias(stated=M / n ** (l * (1.0 - 1.0 / p)), proof_derived=M / n ** (1.0 - l / p))


def eval_expected_sup_bound(spec: MomentEnvelopeSpec, scale: ProcessScale) -> BoundResult:
    """sqrt(8 log(2N) / n) M, an upper bound on E Z for centered vectors with p >= 2."""
    if spec.p < 2:
        raise DomainError(f"p >= 2 violated (p={spec.p!r})")
    value = math.sqrt(8.0 * math.log(2 * scale.N) / scale.n) * spec.M
    return BoundResult(
        value=value,
        family=BoundFamily.EXPECTED_SUP,
        params=dict(p=spec.p, M=spec.M, n=scale.n, N=scale.N),
        notes={"requires_centered": True},
    )


def eval_classical_tail(kind, x, *, n, variance=0.0, mean=0.0, K_b=0.0, N=1):
    """Exponential deviation bounds for bounded or Bernstein-type classes.

    Bousquet: P(Y - E Y >= sqrt(2 x nu) + x/3) <= exp(-n x), nu = variance + 2 mean.
    BernsteinClass: P(Y >= K_b x + sqrt(2x) + sqrt(2 log(2N)/n) + K_b log(2N)/n) <= exp(-n x).
    Returns ``(threshold, prob_bound)``.
    """
    kind = BoundFamily(kind)
    x = _finite("x", x)
    if not x > 0:
        raise DomainError(f"x > 0 violated (x={x!r})")
    if int(n) != n or n < 1:
        raise DomainError(f"n >= 1 violated (n={n!r})")
    prob = math.exp(-n * x)
    if kind is BoundFamily.BOUSQUET:
        if variance < 0:
            raise DomainError(f"variance >= 0 violated (variance={variance!r})")
        if mean < 0:
            raise DomainError(f"E[Y] >= 0 violated (mean={mean!r})")
        nu = variance + 2.0 * mean
        return math.sqrt(2.0 * x * nu) + x / 3.0, prob
    if kind is BoundFamily.BERNSTEIN_CLASS:
        if K_b < 0:
            raise DomainError(f"K_b >= 0 violated (K_b={K_b!r})")
        if int(N) != N or N < 1:
            raise DomainError(f"N >= 1 violated (N={N!r})")
        log2n = math.log(2 * N)
        return K_b * x + math.sqrt(2.0 * x) + math.sqrt(2.0 * log2n / n) + K_b * log2n / n, prob
    raise DomainError(f"{kind.value} is not a classical tail family")


def _need(request, name):
    value = getattr(request, name)
    if value is None:
        raise DomainError(f"{request.family.value} requires parameter {name}")
    return value


def evaluate(request: BoundRequest, spec: MomentEnvelopeSpec, scale: ProcessScale) -> BoundResult:
    """Dispatch a BoundRequest to its evaluator."""
    fam = BoundFamily(request.family)
    if fam in (BoundFamily.MAIN_UPPER, BoundFamily.MAIN_LOWER):
        d = Direction.UPPER if fam is BoundFamily.MAIN_UPPER else Direction.LOWER
        return eval_main_moment_bound(d, _need(request, "l"), _need(request, "eps"), spec, scale)
    if fam in (BoundFamily.CHEBYSHEV_UPPER, BoundFamily.CHEBYSHEV_LOWER):
        d = Direction.UPPER if fam is BoundFamily.CHEBYSHEV_UPPER else Direction.LOWER
        return eval_tail_bound_chebyshev(d, _need(request, "x"), _need(request, "eps"), spec, scale)[0]
    if fam in (BoundFamily.TRUNCATED_UPPER, BoundFamily.TRUNCATED_LOWER):
        d = Direction.UPPER if fam is BoundFamily.TRUNCATED_UPPER else Direction.LOWER
        return eval_truncated_moment_bound(d, _need(request, "l"), _need(request, "eps"),
                                           _need(request, "K"), spec, scale)
    if fam is BoundFamily.SYMMETRIZATION:
        return eval_symmetrization_bound(_need(request, "l"), spec, scale)
    if fam is BoundFamily.FINITE_CLASS:
        return eval_finite_class_bound(_need(request, "l"), spec, scale)
    if fam is BoundFamily.FINITE_CLASS_GENERAL:
        return eval_finite_class_bound(_need(request, "l"), spec, scale, A=_need(request, "A"))
    if fam is BoundFamily.BOUNDED_PART:
        return eval_bounded_part_bound(_need(request, "l"), _need(request, "A"), spec, scale)
    if fam is BoundFamily.TRUNCATION_BIAS:
        l = _need(request, "l")
        bias = eval_truncation_bias(l, spec, scale)
        return BoundResult(
            value=bias.proof_derived,
            family=fam,
            params=dict(l=float(l), p=spec.p, M=spec.M, n=scale.n, N=scale.N,
                        K=scale.n ** (float(l) / spec.p) * spec.M),
            notes={"stated": bias.stated, "proof_derived": bias.proof_derived},
        )
    if fam is BoundFamily.EXPECTED_SUP:
        return eval_expected_sup_bound(spec, scale)
    if fam is BoundFamily.BOUSQUET:
        mean = 0.0 if request.mean is None else request.mean
        x = _need(request, "x")
        threshold, prob = eval_classical_tail(fam, x, n=scale.n, variance=scale.sigma ** 2, mean=mean)
        return BoundResult(value=prob, family=fam, threshold=threshold,
                           params=dict(x=float(x), n=scale.n, variance=scale.sigma ** 2, mean=mean),
                           notes={"event": "Y - E[Y] >= threshold"})
    if fam is BoundFamily.BERNSTEIN_CLASS:
        x = _need(request, "x")
        K_b = _need(request, "K")
        threshold, prob = eval_classical_tail(fam, x, n=scale.n, K_b=K_b, N=scale.N)
        return BoundResult(value=prob, family=fam, threshold=threshold,
                           params=dict(x=float(x), K=float(K_b), n=scale.n, N=scale.N),
                           notes={"event": "Y >= threshold"})
    raise DomainError(f"unknown bound family {request.family!r}")
