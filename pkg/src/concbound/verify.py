"""Bound-versus-simulation checks, exact lemma checks, and regime tables."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import bounds as B
from .combinatorics import c_bound, c_exact
from .errors import DomainError, UsageError
from .simulate import (
    EnsembleConfig,
    PlusMomentTarget,
    _stream,
    analytic_ensemble_moments,
    bootstrap_se,
    estimate,
    simulate_sups,
)
from .special import gamma

DEFAULT_MARGIN = 3.0


@dataclass(frozen=True)
class Verdict:
    """Outcome of one inequality check.

    ``passed`` is always ``empirical - margin_sigmas * empirical_se <= bound``.
    """

    name: str
    empirical: float
    empirical_se: float
    bound: float
    margin_sigmas: float = DEFAULT_MARGIN
    details: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = self.empirical - self.margin_sigmas * self.empirical_se <= self.bound
        object.__setattr__(self, "passed", bool(ok))

    def to_dict(self):
        d = asdict(self)
        return {k: d[k] for k in ("name", "passed", "empirical", "empirical_se", "bound", "margin_sigmas", "details")}


def _scale_for(config, p):
    M, sigma = analytic_ensemble_moments(config, p)
    return B.MomentEnvelopeSpec(p=p, M=M), B.ProcessScale(n=config.n, N=config.N, sigma=sigma)


def check_moment_suite(config: EnsembleConfig, p, targets, R, margin_sigmas=DEFAULT_MARGIN,
                       pilot_fraction=0.2, bound_scale=1.0, threads=None, name="moment"):
    """Main moment inequality for several (l, eps, direction) targets from one simulation.

    ``bound_scale`` multiplies every bound; values other than 1 exist only to
    exercise the failure path.
    """
    targets = [t if isinstance(t, PlusMomentTarget) else PlusMomentTarget(*t) for t in targets]
    spec, scale = _scale_for(config, p)
    for t in targets:
        # validate preconditions before paying for the simulation
        B.eval_main_moment_bound(t.direction, t.l, t.eps, spec, scale)
    summary = estimate(config, R, targets, pilot_fraction=pilot_fraction, threads=threads)
    verdicts = []
    for t, pm in zip(targets, summary.plus_moments):
        bound = B.eval_main_moment_bound(t.direction, t.l, t.eps, spec, scale).value * bound_scale
        verdicts.append(Verdict(
            name=f"{name}:{t.direction.value}:l={t.l:g}:eps={t.eps:g}",
            empirical=pm.estimate,
            empirical_se=pm.se,
            bound=bound,
            margin_sigmas=margin_sigmas,
            details=dict(family=config.family.kind, dependence=config.dependence, n=config.n, N=config.N,
                         p=float(p), M=spec.M, sigma=scale.sigma, threshold=pm.threshold,
                         pilot_mean=summary.pilot_mean, mean_sup=summary.mean_sup,
                         replications=R, evaluation_replications=pm.replications,
                         bound_scale=bound_scale, seed=int(config.seed)),
        ))
    return verdicts


def check_moment_inequality(config: EnsembleConfig, l, eps, direction, R, p, margin_sigmas=DEFAULT_MARGIN,
                            pilot_fraction=0.2, bound_scale=1.0, threads=None) -> Verdict:
    """Single-target form of :func:`check_moment_suite`."""
    return check_moment_suite(config, p, [(l, eps, direction)], R, margin_sigmas=margin_sigmas,
                              pilot_fraction=pilot_fraction, bound_scale=bound_scale, threads=threads)[0]


def check_truncation_lemma(config: EnsembleConfig, l, R, p, margin_sigmas=DEFAULT_MARGIN,
                           bound_scale=1.0, threads=None) -> Verdict:
    """|E[Z_lower - Z]| at K = n^(l/p) M against M / n^(1 - l/p)."""
    if int(R) != R or R < 2:
        raise UsageError(f"replications must be an integer >= 2, got {R!r}")
    spec, scale = _scale_for(config, p)
    bias = B.eval_truncation_bias(l, spec, scale)
    K = config.n ** (l / p) * spec.M
    batch = simulate_sups(config, int(R), K=K, threads=threads)
    diff = batch.Z_lower - batch.Z
    empirical = abs(float(diff.mean()))
    se = bootstrap_se(diff, 0x7FFF_FFFF, config.seed)
    bound = bias.proof_derived * bound_scale
    return Verdict(
        name=f"truncation:l={l:g}",
        empirical=empirical,
        empirical_se=se,
        bound=bound,
        margin_sigmas=margin_sigmas,
        details=dict(family=config.family.kind, dependence=config.dependence, n=config.n, N=config.N,
                     p=float(p), l=float(l), M=spec.M, K=K,
                     stated_bound=bias.stated, proof_derived_bound=bias.proof_derived,
                     stated_passed=bool(empirical - margin_sigmas * se <= bias.stated),
                     mean_Z_upper=float(batch.Z_upper.mean()),
                     replications=int(R), bound_scale=bound_scale, seed=int(config.seed)),
    )


@dataclass(frozen=True)
class NonnegativeFamily:
    """Nonnegative variable W = scale * base, with scale chosen so E W^l = 1.

    kind is one of ``constant`` (base = 1), ``uniform`` (base ~ U[0, 1]),
    ``exponential`` (rate 1) or ``pareto`` (minimum 1, index ``alpha``).
    """

    kind: str
    alpha: float | None = None

    def base_moment(self, l):
        if self.kind == "constant":
            return 1.0
        if self.kind == "uniform":
            return 1.0 / (l + 1.0)
        if self.kind == "exponential":
            return gamma(l + 1.0)
        if self.kind == "pareto":
            if self.alpha is None or not self.alpha > l:
                raise DomainError(f"pareto base has no finite moment of order {l} (alpha={self.alpha})")
            return self.alpha / (self.alpha - l)
        raise DomainError(f"unknown nonnegative family {self.kind!r}")

    def scale_for(self, l):
        return self.base_moment(l) ** (-1.0 / l)

    def draw(self, gen, shape):
        if self.kind == "constant":
            return np.ones(shape)
        if self.kind == "uniform":
            return gen.random(shape)
        if self.kind == "exponential":
            return gen.standard_exponential(shape)
        return (1.0 - gen.random(shape)) ** (-1.0 / self.alpha)


def check_averaging_lemma(family: NonnegativeFamily, l, n, R, seed=0, margin_sigmas=DEFAULT_MARGIN,
                          bound_scale=1.0) -> Verdict:
    """E[(P_n W)^l] <= 1 whenever each E W_i^l <= 1."""
    if not l >= 1:
        raise DomainError(f"l >= 1 violated (l={l!r})")
    if int(R) != R or R < 2:
        raise UsageError(f"replications must be an integer >= 2, got {R!r}")
    s = family.scale_for(l)
    vals = np.empty(int(R))
    for r in range(int(R)):
        w = s * family.draw(_stream(seed, 0, r), n)
        vals[r] = w.mean() ** l
    est = float(vals.mean())
    se = bootstrap_se(vals, 0, seed)
    return Verdict(
        name=f"averaging:{family.kind}:l={l:g}",
        empirical=est,
        empirical_se=se,
        bound=bound_scale * 1.0,
        margin_sigmas=margin_sigmas,
        details=dict(kind=family.kind, alpha=family.alpha, scale=s, n=int(n), l=float(l),
                     replications=int(R), bound_scale=bound_scale, seed=int(seed)),
    )


def check_mgf_lemma(values: Sequence[float], probs: Sequence[float], A, tol=1e-12, bound_scale=1.0) -> Verdict:
    """E exp(W/A) <= 1 + 1/A^2 for a centered finite-support W in [-A, A] with E W^2 <= 1.

    The expectation is an exact weighted sum; the standard error is 0.
    """
    values = [float(v) for v in values]
    probs = [float(q) for q in probs]
    A = float(A)
    if len(values) != len(probs) or not values:
        raise DomainError("values and probs must be nonempty and of equal length")
    if any(q < 0 for q in probs) or abs(math.fsum(probs) - 1.0) > tol:
        raise DomainError("probs must be nonnegative and sum to 1")
    if not A > 0:
        raise DomainError(f"A > 0 violated (A={A!r})")
    if any(abs(v) > A for v in values):
        raise DomainError(f"support must lie in [-A, A] (A={A!r})")
    mean = math.fsum(q * v for q, v in zip(probs, values))
    if abs(mean) > tol:
        raise DomainError(f"W must be centered, E W = {mean!r}")
    second = math.fsum(q * v * v for q, v in zip(probs, values))
    if second > 1.0 + tol:
        raise DomainError(f"E W^2 <= 1 violated (E W^2 = {second!r})")
    mgf = math.fsum(q * math.exp(v / A) for q, v in zip(probs, values))
    return Verdict(
        name=f"mgf:A={A:g}",
        empirical=mgf,
        empirical_se=0.0,
        bound=bound_scale * (1.0 + 1.0 / (A * A)),
        margin_sigmas=0.0,
        details=dict(values=values, probs=probs, A=A, second_moment=second, bound_scale=bound_scale),
    )


def check_combinatorics(m_max=6, n_max=6, bound_scale=1.0) -> Verdict:
    """C(m, n) <= m! (n/2)^floor(m/2) on the full grid, plus the exact anchor values."""
    worst = -math.inf
    violations = []
    for m in range(1, m_max + 1):
        for n in range(1, n_max + 1):
            exact = c_exact(m, n)
            bound = c_bound(m, n)
            worst = max(worst, exact / bound)
            if exact > bound:
                violations.append([m, n, exact, bound])
    anchors = {}
    for n in range(1, n_max + 1):
        anchors[f"C(1,{n})"] = [c_exact(1, n), 0]
        anchors[f"C(2,{n})"] = [c_exact(2, n), n]
    for m in range(2, m_max + 1):
        anchors[f"C({m},1)"] = [c_exact(m, 1), 1]
    if m_max >= 3 and n_max >= 2:
        anchors["C(3,2)"] = [c_exact(3, 2), 2]
    anchors_ok = all(a == b for a, b in anchors.values())
    # empirical = worst exact/bound ratio; anchor mismatches force a failure
    empirical = worst if anchors_ok else math.inf
    return Verdict(
        name=f"combinatorics:m<={m_max}:n<={n_max}",
        empirical=empirical,
        empirical_se=0.0,
        bound=bound_scale * 1.0,
        margin_sigmas=0.0,
        details=dict(m_max=m_max, n_max=n_max, violations=violations, anchors=anchors, anchors_ok=anchors_ok,
                     bound_scale=bound_scale),
    )


# ---------------------------------------------------------------- regimes

@dataclass(frozen=True)
class RegimeRow:
    l: float
    p: float
    n: int
    N: int
    M: float
    bound_main: float | None
    bound_symmetrization: float | None
    bound_finite_class: float | None
    threshold_main: float | None
    threshold_symmetrization: float | None
    threshold_finite_class: float | None
    expected_sup_bound: float | None
    tightest: str | None
    l_le_p_lt_2l: bool
    inapplicable: list

    def to_dict(self):
        return asdict(self)


def regime_comparison(grid, M=1.0):
    """Tabulate the envelope terms of the three moment bounds on a parameter grid.

    Each row holds the main bound at eps = 1 with sigma = 0, the Gamma bound,
    and the finite-class bound, all for E[Z - threshold]_+^l at the same l,
    with thresholds 2 E Z, 4 E Z and 2 M log(2N)/sqrt(n). E Z is replaced by
    sqrt(8 log(2N)/n) M. Families whose preconditions fail are None and are
    listed in ``inapplicable``.
    """
    rows = []
    for l, p, n, N in grid:
        spec = B.MomentEnvelopeSpec(p=p, M=M)
        scale = B.ProcessScale(n=n, N=N, sigma=0.0)
        inapplicable = []
        values = {}
        try:
            values["main"] = B.eval_main_moment_bound(B.Direction.UPPER, l, 1.0, spec, scale).value
        except DomainError:
            inapplicable.append("main")
        try:
            values["symmetrization"] = B.eval_symmetrization_bound(l, spec, scale).value
        except DomainError:
            inapplicable.append("symmetrization")
        fc_threshold = None
        try:
            fc = B.eval_finite_class_bound(l, spec, scale)
            values["finite_class"] = fc.value
            fc_threshold = fc.threshold
        except DomainError:
            inapplicable.append("finite_class")
        ez = B.eval_expected_sup_bound(spec, scale).value if spec.p >= 2 else None
        tightest = min(values, key=values.get) if values else None
        rows.append(RegimeRow(
            l=float(l), p=float(p), n=int(n), N=int(N), M=float(M),
            bound_main=values.get("main"),
            bound_symmetrization=values.get("symmetrization"),
            bound_finite_class=values.get("finite_class"),
            threshold_main=None if ez is None or "main" not in values else 2.0 * ez,
            threshold_symmetrization=None if ez is None or "symmetrization" not in values else 4.0 * ez,
            threshold_finite_class=fc_threshold,
            expected_sup_bound=ez,
            tightest=tightest,
            l_le_p_lt_2l=bool(l <= p < 2 * l),
            inapplicable=inapplicable,
        ))
    return rows
