"""Acceptance criteria 1-8, each at its stated tolerance and runtime budget.

Each test registers a line through the ``criterion`` fixture; the terminal
summary lists PASS or FAIL per criterion.
"""
import json
import math
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

from concbound import bounds as B
from concbound.cli import main
from concbound.combinatorics import c_bound, c_exact
from concbound.simulate import IID, SHARED, BoundedUniform, EnsembleConfig, Rademacher, SymmetricPareto
from concbound.special import gamma
from concbound.verify import check_mgf_lemma, check_moment_suite, check_truncation_lemma

FIXTURES = Path(__file__).parent / "fixtures"
UP, LO = B.Direction.UPPER, B.Direction.LOWER


def _coefficients(direction, eps):
    # at n = 1 the bound collapses to its coefficients
    spec1, spec0 = B.MomentEnvelopeSpec(p=4.0, M=1.0), B.MomentEnvelopeSpec(p=4.0, M=0.0)
    env = B.eval_main_moment_bound(direction, 1.0, eps, spec1, B.ProcessScale(n=1, sigma=0.0)).value
    sig = B.eval_main_moment_bound(direction, 1.0, eps, spec0, B.ProcessScale(n=1, sigma=1.0)).value
    return env, sig


def test_criterion_1_first_order_constants(criterion):
    t0 = time.perf_counter()
    up = _coefficients(UP, 1.0)
    lo = _coefficients(LO, 0.5)
    dt = time.perf_counter() - t0
    criterion(1, f"upper coefficients {up}, lower coefficients {lo}, {dt:.3f}s")
    assert abs(up[0] - 72.0) <= 1e-12 and abs(up[1] - 4.0) <= 1e-12
    assert abs(lo[0] - 179.3) <= 1e-12 and abs(lo[1] - 4.7) <= 1e-12
    assert dt < 1.0


def test_criterion_2_counting_lemma(criterion):
    t0 = time.perf_counter()
    worst = max(c_exact(m, n) / c_bound(m, n) for m in range(1, 7) for n in range(1, 7))
    anchors = ([c_exact(1, n) == 0 for n in range(1, 7)] + [c_exact(2, n) == n for n in range(1, 7)]
               + [c_exact(3, 2) == 2] + [c_exact(m, 1) == 1 for m in range(2, 7)])
    dt = time.perf_counter() - t0
    criterion(2, f"max exact/bound = {worst:.6g}, anchors {sum(anchors)}/{len(anchors)}, {dt:.2f}s")
    assert worst <= 1.0 and all(anchors) and dt < 10.0


def test_criterion_3_monte_carlo_dominance(criterion):
    t0 = time.perf_counter()
    base = [(1.0, 1.0, "upper"), (1.0, 0.5, "lower")]
    heavy = base + [(2.0, 1.0, "upper"), (2.0, 0.5, "lower")]
    # the Pareto case runs under both envelope conventions
    cases = [
        (Rademacher(), IID, base),
        (BoundedUniform(-1.0, 1.0), IID, base),
        (SymmetricPareto(4.5), SHARED, heavy),
        (SymmetricPareto(4.5), IID, heavy),
    ]
    verdicts = []
    for k, (fam, dep, targets) in enumerate(cases):
        cfg = EnsembleConfig(n=100, N=50, family=fam, dependence=dep, seed=31_000 + k)
        verdicts += [(f"{fam.kind}/{dep}", v) for v in check_moment_suite(cfg, 4.0, targets, 100_000)]
    dt = time.perf_counter() - t0
    worst = max(v.empirical - 3 * v.empirical_se - v.bound for _, v in verdicts)
    criterion(3, f"{sum(v.passed for _, v in verdicts)}/{len(verdicts)} verdicts passed, "
                 f"max(empirical - 3 SE - bound) = {worst:.4g}, {dt:.1f}s")
    for kind, v in verdicts:
        print(kind, v.name, v.empirical, v.empirical_se, v.bound, v.passed)
    assert all(v.passed for _, v in verdicts)
    assert dt < 300.0


def test_criterion_4_truncation_bias(criterion):
    t0 = time.perf_counter()
    verdicts = []
    for l in (1.0, 2.0):
        for n in (50, 200):
            cfg = EnsembleConfig(n=n, N=50, family=SymmetricPareto(4.5), dependence=SHARED, seed=41_000 + n)
            v = check_truncation_lemma(cfg, l, 20_000, p=4.0)
            M = v.details["M"]
            assert v.bound == pytest.approx(M / n ** (1 - l / 4.0), rel=1e-12)
            assert v.details["K"] == pytest.approx(n ** (l / 4.0) * M, rel=1e-12)
            verdicts.append(v)
    dt = time.perf_counter() - t0
    criterion(4, f"{sum(v.passed for v in verdicts)}/4 passed, "
                 f"max bias/bound = {max(v.empirical / v.bound for v in verdicts):.4g}, {dt:.1f}s")
    assert all(v.passed for v in verdicts) and dt < 120.0


def test_criterion_5_gamma_accuracy(criterion):
    t0 = time.perf_counter()
    mpmath.mp.dps = 50
    refs = {0.5: mpmath.sqrt(mpmath.pi), 1.0: mpmath.mpf(1), 5.0: mpmath.mpf(24)}
    errs = {}
    for x in (0.5, 1.0, 1.5, 2.0, 5.0, 10.0):
        ref = refs.get(x, mpmath.gamma(mpmath.mpf(x)))
        errs[x] = float(abs((mpmath.mpf(gamma(x)) - ref) / ref))
    dt = time.perf_counter() - t0
    criterion(5, f"max relative error {max(errs.values()):.3g}, {dt:.3f}s")
    assert max(errs.values()) <= 1e-12 and dt < 1.0


def test_criterion_6_mgf_exact(criterion):
    t0 = time.perf_counter()
    verdicts = [check_mgf_lemma([-1.0, 1.0], [0.5, 0.5], A) for A in (1.0, 2.0, 4.0)]
    dt = time.perf_counter() - t0
    criterion(6, ", ".join(f"A={v.details['A']:g}: {v.empirical:.6f} <= {v.bound:g}" for v in verdicts)
              + f", {dt:.3f}s")
    for v, A in zip(verdicts, (1.0, 2.0, 4.0)):
        assert v.empirical == pytest.approx(math.cosh(1 / A), rel=1e-15) and v.empirical_se == 0.0
    assert all(v.passed for v in verdicts) and dt < 1.0


def _dense_oracle(direction, x, eps, p, M, sigma, n):
    l = np.arange(1.0, p, 1e-4)
    l = np.append(l, p)
    if direction is UP:
        env, sig = (64 / eps + 7 + eps) * l, 4 * np.sqrt(l)
    else:
        env, sig = (86.4 / eps + 7 - eps) * l, 4.7 * np.sqrt(l)
    vals = np.exp(l * np.log((env * M / n ** (1 - l / p) + sig * sigma / np.sqrt(n)) / x))
    return min(float(vals.min()), 1.0)


def test_criterion_7_optimizer_soundness(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20261014)
    worst, unclipped, ok_ends = 0.0, 0, True
    for _ in range(20):
        direction = UP if rng.random() < 0.5 else LO
        eps, p = rng.uniform(0.05, 1.0), rng.uniform(1.0, 8.0)
        M, sigma = rng.uniform(0.1, 2.0), rng.uniform(0.0, 2.0)
        n, x = int(10 ** rng.uniform(3, 7)), rng.uniform(0.05, 3.0)
        spec, scale = B.MomentEnvelopeSpec(p=p, M=M), B.ProcessScale(n=n, N=10, sigma=sigma)
        res, _ = B.eval_tail_bound_chebyshev(direction, x, eps, spec, scale)
        worst = max(worst, abs(res.value - _dense_oracle(direction, x, eps, p, M, sigma, n)))
        unclipped += res.value < 1.0
        ends = [B.eval_main_moment_bound(direction, l, eps, spec, scale).value / x ** l for l in (1.0, p)]
        ok_ends &= res.raw_value <= min(ends)
    dt = time.perf_counter() - t0
    criterion(7, f"max |optimizer - dense grid| = {worst:.3g} over 20 sets ({unclipped} below the cap), "
                 f"endpoint check {'ok' if ok_ends else 'violated'}, {dt:.2f}s")
    assert worst <= 1e-9 and ok_ends and dt < 30.0


def test_criterion_8_determinism_and_failure_path(criterion, tmp_path):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text("command = verify\nseed = 8\nreplications = 20000\n")
    a, b, bad = tmp_path / "a.jsonl", tmp_path / "b.jsonl", tmp_path / "bad.jsonl"
    status_a = main(["verify", "--config", str(cfg), "--out", str(a)])
    status_b = main(["verify", "--config", str(cfg), "--out", str(b)])
    identical = a.read_bytes() == b.read_bytes()
    status_bad = main(["verify", "--config", str(FIXTURES / "corrupted.cfg"), "--out", str(bad)])
    checks = len(a.read_text().splitlines())
    criterion(8, f"{checks} checks, outputs identical: {identical}, exits {status_a}/{status_b}, "
                 f"corrupted fixture exit {status_bad}")
    assert identical and status_a == status_b == 0 and status_bad == 1
    assert any(not json.loads(line)["passed"] for line in bad.read_text().splitlines())
