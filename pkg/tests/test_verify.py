import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concbound.errors import DomainError
from concbound.simulate import SHARED, BoundedUniform, EnsembleConfig, Rademacher, SymmetricPareto
from concbound.verify import (
    NonnegativeFamily,
    Verdict,
    check_averaging_lemma,
    check_combinatorics,
    check_mgf_lemma,
    check_moment_inequality,
    check_moment_suite,
    check_truncation_lemma,
    regime_comparison,
)


# ---------------------------------------------------------------- verdict rule

@settings(max_examples=200)
@given(st.floats(-1e6, 1e6), st.floats(0, 1e3), st.floats(-1e6, 1e6), st.floats(0, 10))
def test_verdict_rule(emp, se, bound, margin):
    v = Verdict("x", emp, se, bound, margin)
    assert v.passed == (emp - margin * se <= bound)
    d = v.to_dict()
    assert Verdict(d["name"], d["empirical"], d["empirical_se"], d["bound"], d["margin_sigmas"]).passed == d["passed"]


def test_injected_failure():
    assert not Verdict("injected", empirical=1.0 + 10 * 0.01, empirical_se=0.01, bound=1.0).passed


# ---------------------------------------------------------------- moment checks

def test_zero_ensemble_passes():
    cfg = EnsembleConfig(n=10, N=3, family=BoundedUniform(0.0, 0.0), seed=1)
    v = check_moment_inequality(cfg, 1, 1.0, "upper", 500, p=2.0)
    assert v.empirical == 0.0 and v.passed


def test_rademacher_single_class():
    cfg = EnsembleConfig(n=100, N=1, family=Rademacher(), seed=2024)
    v = check_moment_inequality(cfg, 1, 1.0, "upper", 100_000, p=4.0)
    assert v.bound == pytest.approx(72 / 100 ** 0.75 + 0.4, rel=1e-14)
    assert abs(v.bound - 2.677) < 1e-3
    assert v.passed


def test_corrupted_bound_fails():
    # E Z is order one here, so the first-order deviation is far above 1e-3 x bound
    cfg = EnsembleConfig(n=1, N=1, family=BoundedUniform(-1.0, 1.0), seed=5)
    good = check_moment_suite(cfg, 4.0, [(1, 0.5, "lower")], 5000)[0]
    bad = check_moment_suite(cfg, 4.0, [(1, 0.5, "lower")], 5000, bound_scale=1e-4)[0]
    assert good.passed and not bad.passed
    assert bad.empirical == good.empirical


def test_moment_check_preconditions():
    cfg = EnsembleConfig(n=10, N=2, family=SymmetricPareto(3.0), seed=1)
    with pytest.raises(DomainError):
        check_moment_inequality(cfg, 1, 1.0, "upper", 200, p=3.0)
    with pytest.raises(DomainError):
        check_moment_inequality(cfg, 2.5, 1.0, "upper", 200, p=2.0)


# ---------------------------------------------------------------- truncation check

@pytest.mark.parametrize("seed", [0, 1, 99])
def test_truncation_bounded_family_exact_zero(seed):
    cfg = EnsembleConfig(n=20, N=5, family=BoundedUniform(-1.0, 1.0), seed=seed)
    v = check_truncation_lemma(cfg, 1.0, 300, p=2.0)
    assert v.empirical == 0.0 and v.empirical_se == 0.0 and v.passed


def test_truncation_degenerate_M0():
    v = check_truncation_lemma(EnsembleConfig(n=4, N=2, family=BoundedUniform(0.0, 0.0)), 1.0, 200, p=2.0)
    assert v.bound == 0.0 and v.empirical == 0.0 and v.passed


def test_truncation_pareto_records_both_variants():
    cfg = EnsembleConfig(n=100, N=50, family=SymmetricPareto(4.5), dependence=SHARED, seed=3)
    v = check_truncation_lemma(cfg, 2.0, 20_000, p=4.0)
    assert v.passed
    M = 3.0 ** 0.5
    assert v.details["proof_derived_bound"] == pytest.approx(M / 100 ** 0.5, rel=1e-12)
    assert v.details["stated_bound"] == pytest.approx(M / 100 ** 1.5, rel=1e-12)
    assert "stated_passed" in v.details


# ---------------------------------------------------------------- averaging

def test_averaging_constant_equality():
    v = check_averaging_lemma(NonnegativeFamily("constant"), 3.0, 7, 200)
    assert v.empirical == 1.0 and v.passed


def test_averaging_uniform():
    v = check_averaging_lemma(NonnegativeFamily("uniform"), 1.0, 10, 5000, seed=4)
    assert v.details["scale"] == 2.0
    assert abs(v.empirical - 1.0) < 5 * v.empirical_se and v.passed


def test_averaging_exponential():
    v = check_averaging_lemma(NonnegativeFamily("exponential"), 2.0, 10, 5000, seed=8)
    assert v.details["scale"] == pytest.approx(1 / math.sqrt(2), rel=1e-13)
    assert v.passed


def test_averaging_infinite_moment():
    with pytest.raises(DomainError):
        check_averaging_lemma(NonnegativeFamily("pareto", alpha=2.0), 2.0, 5, 100)


# ---------------------------------------------------------------- mgf

@pytest.mark.parametrize("A", [1.0, 2.0, 4.0])
def test_mgf_two_point(A):
    v = check_mgf_lemma([-1.0, 1.0], [0.5, 0.5], A)
    assert v.empirical == pytest.approx(math.cosh(1 / A), rel=1e-15)
    assert v.bound == 1 + 1 / A ** 2 and v.empirical_se == 0.0 and v.passed


def test_mgf_zero_and_bit_identical():
    v = check_mgf_lemma([0.0], [1.0], 3.0)
    assert v.empirical == 1.0 and v.passed
    assert check_mgf_lemma([-0.5, 1.0], [2 / 3, 1 / 3], 2.0) == check_mgf_lemma([-0.5, 1.0], [2 / 3, 1 / 3], 2.0)


@pytest.mark.parametrize("values,probs,A", [([0.5, 1.5], [0.5, 0.5], 2.0), ([-3.0, 3.0], [0.5, 0.5], 2.0),
                                            ([-2.0, 2.0], [0.5, 0.5], 2.0)])
def test_mgf_precondition_errors(values, probs, A):
    with pytest.raises(DomainError):
        check_mgf_lemma(values, probs, A)


@settings(max_examples=200)
@given(st.floats(0.01, 1.0), st.floats(1.0, 50.0))
def test_mgf_two_point_family(a, A):
    # W in {-a, b} with mean zero and E W^2 = a b <= 1
    b = min(A, 1.0 / a)
    if b < a * 1e-6:
        return
    q = b / (a + b)
    assert check_mgf_lemma([-a, b], [q, 1 - q], max(A, a), tol=1e-9).passed


# ---------------------------------------------------------------- combinatorics

def test_combinatorics_verdict():
    v = check_combinatorics(6, 6)
    assert v.passed and v.details["anchors_ok"]
    assert v.details["anchors"]["C(2,5)"] == [5, 5]
    assert v.details["anchors"]["C(1,6)"] == [0, 0]


# ---------------------------------------------------------------- regimes

def test_regimes_empty():
    assert regime_comparison([]) == []


def test_regimes_flag():
    row = regime_comparison([(2, 3.0, 100, 5)])[0]
    assert row.l_le_p_lt_2l


def test_regimes_row_values():
    row = regime_comparison([(2, 3.0, 10_000, 1)], M=1.0)[0]
    main = ((64 + 8) * 2 / 10_000 ** (1 - 2 / 3)) ** 2
    gam = 2 * math.gamma(1.0) * (32 / 10_000) * 1.0
    fc = 35 * 4 / 10_000
    assert row.bound_main == pytest.approx(main, rel=1e-13)
    assert row.bound_symmetrization == pytest.approx(gam, rel=1e-13)
    assert row.bound_finite_class == pytest.approx(fc, rel=1e-13)
    values = {"main": main, "symmetrization": gam, "finite_class": fc}
    assert row.tightest == min(values, key=values.get)
    ez = math.sqrt(8 * math.log(2) / 10_000)
    assert row.threshold_main == pytest.approx(2 * ez) and row.threshold_symmetrization == pytest.approx(4 * ez)


def test_regimes_inapplicable():
    row = regime_comparison([(1.5, 1.8, 100, 3)])[0]
    assert set(row.inapplicable) == {"finite_class"}
    assert row.expected_sup_bound is None and row.threshold_main is None
    row = regime_comparison([(3, 2.0, 100, 3)])[0]
    assert set(row.inapplicable) == {"main", "symmetrization", "finite_class"} and row.tightest is None
