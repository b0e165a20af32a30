import math

import numpy as np
import pytest

from conftest import experiment, mean_by_T
from vape.env import ContextStream, MarketEnv, NoiseSpec, ValuationModel
from vape.linear import (
    LinearBounds,
    LinearVapeConfig,
    RidgeState,
    act,
    config_from_horizon,
    elliptical_norm,
    explore_update,
    run,
)
from vape.pricing import DemandTable, active_set, build_grid
from vape.trace import ELIMINATE, EXPLORE

UNIT = LinearBounds(B_x=1.0, B_theta=1.0, B_xi=1.0, L_xi=0.5)


def test_config_schedule_at_large_horizon():
    T, d = 10**6, 3
    cfg = config_from_horizon(T, d, UNIT)
    assert cfg.epsilon == pytest.approx(0.1197638, abs=1e-7)
    assert cfg.alpha == pytest.approx(1e-24, rel=1e-12)
    assert -math.log(cfg.alpha) == pytest.approx(55.2620422, abs=1e-6)
    assert UNIT.B_y == 2.0
    mu = cfg.epsilon / (2.0 * math.sqrt(3.0 * math.log((1 + 10**6) / 1e-24)) + 1.0)
    assert cfg.mu == pytest.approx(mu, rel=1e-12)
    assert cfg.mu == pytest.approx(0.0040201116, rel=1e-8)


def test_config_rejects_short_horizon():
    with pytest.raises(ValueError):
        config_from_horizon(1, 3, UNIT)


def test_elliptical_norm_examples():
    assert elliptical_norm(np.eye(3), np.array([1.0, 0, 0])) == pytest.approx(1.0, abs=1e-15)
    assert elliptical_norm(np.diag([4.0, 1, 1]), np.array([1.0, 0, 0])) == pytest.approx(0.5, abs=1e-15)


def test_elliptical_norm_matches_dense_inverse():
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = int(rng.integers(1, 8))
        A = rng.standard_normal((d, d + 3))
        V = np.eye(d) + A @ A.T
        x = rng.standard_normal(d)
        ref = math.sqrt(x @ np.linalg.inv(V) @ x)
        assert abs(elliptical_norm(V, x) - ref) <= 1e-10


def test_state_norm_matches_elliptical_norm():
    rng = np.random.default_rng(1)
    s = RidgeState(4)
    for _ in range(50):
        x = rng.standard_normal(4)
        explore_update(s, x, int(rng.integers(2)), 2.0)
        y = rng.standard_normal(4)
        assert abs(s.norm(y) - elliptical_norm(s.V, y)) <= 1e-10


def test_explore_update_examples():
    s = RidgeState(3)
    assert np.array_equal(s.theta_hat, np.zeros(3))
    explore_update(s, np.array([1.0, 0, 0]), 1, 2.0)
    assert np.allclose(s.V, np.diag([2.0, 1, 1]))
    assert np.allclose(s.b, [2.0, 0, 0])
    assert np.allclose(s.theta_hat, [1.0, 0, 0])
    s = RidgeState(3)
    explore_update(s, np.array([1.0, 0, 0]), 0, 2.0)
    assert np.allclose(s.b, [-2.0, 0, 0])
    assert np.allclose(s.theta_hat, [-1.0, 0, 0])


def test_ridge_identity_after_every_update():
    rng = np.random.default_rng(2)
    s = RidgeState(3)
    gram = np.eye(3)
    for _ in range(500):
        x = rng.standard_normal(3)
        x /= np.linalg.norm(x)
        explore_update(s, x, int(rng.integers(2)), 2.0)
        gram += np.outer(x, x)
        assert np.max(np.abs(s.V @ s.theta_hat - s.b)) <= 1e-10
        assert np.allclose(s.V, s.V.T)
        assert np.min(np.linalg.eigvalsh(s.V)) >= 1.0 - 1e-12
    assert np.allclose(s.V, gram)


def _cfg(mu, eps=0.1, T=100):
    return LinearVapeConfig(T=T, d=3, epsilon=eps, mu=mu, alpha=1e-4, bounds=UNIT)


def test_act_fresh_state_explores():
    cfg = _cfg(0.5)
    grid = build_grid(cfg.epsilon, UNIT.B_y)
    s = RidgeState(3)
    price, phase, k = act(s, np.array([0.0, 0.6, 0.8]), grid, DemandTable.for_grid(grid), cfg, np.random.default_rng(0))
    assert phase == EXPLORE and k is None
    assert -UNIT.B_y <= price <= UNIT.B_y


def test_act_eliminates_once_direction_is_known():
    cfg = _cfg(0.5)
    grid = build_grid(cfg.epsilon, UNIT.B_y)
    s = RidgeState(3)
    x = np.array([1.0, 0, 0])
    for _ in range(10):
        explore_update(s, x, 1, UNIT.B_y)
    table = DemandTable.for_grid(grid)
    price, phase, k = act(s, x, grid, table, cfg, np.random.default_rng(0))
    assert phase == ELIMINATE
    g_hat = min(max(s.estimate(x), -UNIT.B_g), UNIT.B_g)
    # all-zero counts: every bound is infinite, so the smallest active index wins
    assert k == int(active_set(grid, g_hat, UNIT.B_y)[0])
    assert price == pytest.approx(g_hat + k * cfg.epsilon)
    # an orthogonal direction is still unexplored
    _, phase, _ = act(s, np.array([0, 1.0, 0]), grid, table, cfg, np.random.default_rng(0))
    assert phase == EXPLORE


def _fixed_context_env(d=1, theta=(0.5,)):
    return MarketEnv(
        noise=NoiseSpec.uniform(-1, 1),
        valuation=ValuationModel.linear(theta, B_x=1.0, B_theta=1.0),
        contexts=ContextStream.finite_pool_uniform([[1.0] + [0.0] * (d - 1)]),
    )


def test_run_zero_horizon_is_empty():
    env = _fixed_context_env()
    cfg = LinearVapeConfig(T=0, d=1, epsilon=0.1, mu=0.1, alpha=1e-4, bounds=LinearBounds.from_env(env))
    trace = run(env, cfg, seed=0)
    assert trace.T == 0 and trace.cumulative_regret == 0.0 and trace.exploration_count == 0


def test_fixed_context_exploration_is_a_prefix():
    env = _fixed_context_env()
    cfg = config_from_horizon(5000, 1, LinearBounds.from_env(env))
    trace = run(env, cfg, seed=3)
    n = trace.exploration_count
    # norm after n updates is 1/sqrt(1+n), so exploration stops at ceil(1/mu^2 - 1)
    assert n == math.ceil(1 / cfg.mu**2 - 1)
    assert n <= math.ceil(1 / cfg.mu**2)
    assert np.all(trace.phase[:n] == EXPLORE)
    assert np.all(trace.phase[n:] == ELIMINATE)
    assert n < 5000


def test_run_trace_invariants(stochastic_env_config):
    env = stochastic_env_config.build(6000)
    cfg = config_from_horizon(6000, env.dim, LinearBounds.from_env(env))
    trace = run(env, cfg, seed=12)
    assert np.all(trace.regret >= -1e-9)
    assert trace.cumulative_regret == pytest.approx(float(np.sum(trace.regret)))
    elim = trace.phase == ELIMINATE
    assert np.all(np.isnan(trace.increment[~elim]))
    assert not np.any(np.isnan(trace.increment[elim]))
    assert np.all(np.abs(trace.g_hat[elim]) <= env.B_g)
    posted = trace.price[elim]
    assert np.all((posted >= -1e-12) & (posted <= env.B_y + 1e-12))


def test_run_is_deterministic(stochastic_env_config):
    env = stochastic_env_config.build(3000)
    cfg = config_from_horizon(3000, env.dim, LinearBounds.from_env(env))
    a, b = run(env, cfg, seed=5), run(env, cfg, seed=5)
    for name in ("phase", "price", "increment", "regret", "g_hat", "g_true"):
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True)
    c = run(env, cfg, seed=6)
    assert not np.array_equal(a.price, c.price)


def test_exploration_budget_over_100_runs(stochastic_env_config):
    env = stochastic_env_config.build(3000)
    cfg = config_from_horizon(3000, env.dim, LinearBounds.from_env(env))
    violations = sum(run(env, cfg, seed=s).exploration_count > cfg.exploration_budget for s in range(100))
    assert violations == 0


def test_estimator_accuracy_on_elimination_rounds(stochastic_env_config):
    """|g_hat - g(x)| <= eps on at least 99% of elimination rounds, 50 runs at T = 1e5."""
    T = 10**5
    env = stochastic_env_config.build(T)
    cfg = config_from_horizon(T, env.dim, LinearBounds.from_env(env))
    good = total = 0
    for s in range(50):
        trace = run(env, cfg, seed=1000 + s)
        elim = trace.phase == ELIMINATE
        err = np.abs(trace.g_hat[elim] - trace.g_true[elim])
        good += int(np.sum(err <= cfg.epsilon))
        total += int(elim.sum())
    assert total > 0
    assert good / total >= 0.99


def test_vape_beats_etc_at_1e5():
    """Mean regret of linear VAPE below explore-then-commit at T = 1e5 over 15 seeds."""
    vape = mean_by_T(experiment("vape_linear", "stochastic_linear", (100000,), 15))[100000]
    etc = mean_by_T(experiment("etc", "stochastic_linear", (100000,), 15))[100000]
    print(f"T=1e5 mean regret: vape_linear={vape:.1f} etc={etc:.1f}")
    assert vape < etc
