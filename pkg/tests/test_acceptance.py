"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also gathered into an "acceptance criteria" section of the
pytest terminal summary.
"""

import numpy as np
import pytest

from conftest import STOCHASTIC_HORIZONS, experiment, mean_by_T, record_criterion
from vape import checks, harness, scenarios
from vape.env import NoiseSpec, optimal_price_at_value
from vape.envconfig import load_env_config
from vape.linear import LinearBounds, config_from_horizon


def _seconds(records) -> float:
    return float(sum(r.seconds for r in records))


def test_criterion_1_linear_regret_slope():
    recs = experiment("vape_linear", "stochastic_linear", STOCHASTIC_HORIZONS, 15)
    rows = harness.curve_rows(recs)
    slope, _ = harness.fit_loglog_slope([(T, m) for T, m, _, _ in rows])
    secs = _seconds(recs)
    means = ", ".join(f"T={T}: {m:.0f}" for T, m, _, _ in rows)
    ok = record_criterion(
        1,
        0.55 <= slope <= 0.80 and secs < 300,
        f"log-log slope {slope:.4f} (target [0.55, 0.80]); mean regret {means}; {secs:.0f}s compute",
    )
    assert ok


def test_criterion_2_exploration_budget():
    recs = experiment("vape_linear", "stochastic_linear", STOCHASTIC_HORIZONS, 15)
    env = load_env_config(scenarios.path("stochastic_linear")).build(2)
    bounds = LinearBounds.from_env(env)
    violations = 0
    worst = 0.0
    for r in recs:
        budget = config_from_horizon(r.T, env.dim, bounds).exploration_budget
        violations += r.exploration_rounds > budget
        worst = max(worst, r.exploration_rounds / budget)
    ok = record_criterion(
        2,
        violations == 0 and len(recs) == 60,
        f"{violations} violations over {len(recs)} runs; largest count/budget {worst:.2e}",
    )
    assert ok


def test_criterion_3_adversarial_robustness():
    horizons = (1000, 4000, 10000)
    vape_recs = experiment("vape_linear", "adversarial_linear", horizons, 15)
    etc_recs = experiment("etc", "adversarial_linear", horizons, 15)
    vape = [mean_by_T(vape_recs)[T] / T for T in horizons]
    etc = [mean_by_T(etc_recs)[T] / T for T in horizons]
    vape_decreasing = all(b < a for a, b in zip(vape, vape[1:]))
    etc_not_decreasing = all(b >= a for a, b in zip(etc, etc[1:]))
    secs = _seconds(vape_recs) + _seconds(etc_recs)
    fmt = lambda xs: ", ".join(f"{x:.4f}" for x in xs)  # noqa: E731
    ok = record_criterion(
        3,
        vape_decreasing and etc_not_decreasing and secs < 120,
        f"VAPE regret/T [{fmt(vape)}] decreasing={vape_decreasing}; "
        f"ETC regret/T [{fmt(etc)}] non-decreasing={etc_not_decreasing}; {secs:.0f}s compute",
    )
    assert ok


def test_criterion_4_nonparametric_sublinearity():
    recs = experiment("vape_nonparam", "nonparam_1d", (5000, 50000), 10)
    means = mean_by_T(recs)
    small, large = means[5000] / 5000, means[50000] / 50000
    explored = np.mean([r.exploration_rounds / r.T for r in recs])
    secs = _seconds(recs)
    ok = record_criterion(
        4,
        large < 0.5 * small and secs < 180,
        f"regret/T {small:.4f} at T=5e3, {large:.4f} at T=5e4, ratio {large / small:.3f} (target < 0.5); "
        f"exploration fraction {explored:.3f}; {secs:.0f}s compute",
    )
    assert ok


def test_criterion_5_unbiasedness():
    res = checks.check_unbiasedness(pairs=10, n=10**6, seed=0)
    assert record_criterion(5, res.passed, res.detail)


def test_criterion_6_confidence_coverage():
    res = checks.check_confidence_coverage(seeds=50, alpha=1e-4)
    assert record_criterion(6, res.passed, res.detail)


def test_criterion_7_reward_lipschitz():
    results = [checks.check_reward_lipschitz(n, pairs=10**4) for n in checks.reference_noises()]
    detail = "; ".join(f"{r.name}: {r.detail}" for r in results)
    assert record_criterion(7, all(r.passed for r in results), detail)


def test_criterion_8_covering_soundness():
    res = checks.check_covering_soundness(configs=20, points=10**4)
    assert record_criterion(8, res.passed, res.detail)


def test_criterion_9_martingale_hoeffding():
    res = checks.check_martingale_hoeffding(n_sequences=10**4, t=100, alpha=0.01)
    assert record_criterion(9, res.passed, res.detail)


def test_criterion_10_oracle_closed_form():
    p, v = optimal_price_at_value(NoiseSpec.uniform(-1.0, 1.0), 0.5, 2.0)
    ok = abs(p - 0.75) <= 1e-4 and abs(v - 0.28125) <= 1e-6
    assert record_criterion(10, ok, f"p*={p:.8f} (|err| {abs(p - 0.75):.1e}), pi*={v:.10f} (|err| {abs(v - 0.28125):.1e})")
