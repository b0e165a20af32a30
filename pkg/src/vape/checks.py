"""Monte-Carlo and numerical checks of the guarantees the algorithms rely on.

Each check returns a :class:`CheckResult`; ``run_selftest`` runs the whole
battery and is what ``vape selftest`` prints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .env import (
    ContextStream,
    MarketEnv,
    NoiseSpec,
    ValuationModel,
    demand,
    next_context,
    optimal_price_at_value,
    revenue_at_value,
    sale_at_value,
)
from .linear import LinearBounds, config_from_horizon
from .nonparam import build_covering, covering_cardinality_bound, nearest_center
from .pricing import ConfidenceParams, DemandTable, build_grid, eliminate_and_select, update_demand
from .trace import run_streams


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def reference_noises() -> list[NoiseSpec]:
    return [NoiseSpec.uniform(-1.0, 1.0), NoiseSpec.truncated_gaussian(0.0, 0.1, -1.0, 1.0)]


def stochastic_linear_env(seed: int = 0, pool_size: int = 5, d: int = 3) -> MarketEnv:
    """Finite pool of unit Gaussian contexts, unit theta, truncated Gaussian noise."""
    rng = np.random.default_rng(seed)
    pool = rng.standard_normal((pool_size, d))
    pool /= np.linalg.norm(pool, axis=1, keepdims=True)
    theta = rng.standard_normal(d)
    theta /= np.linalg.norm(theta)
    return MarketEnv(
        noise=NoiseSpec.truncated_gaussian(0.0, 0.1, -1.0, 1.0),
        valuation=ValuationModel.linear(theta, B_x=1.0, B_theta=1.0),
        contexts=ContextStream.finite_pool_uniform(pool.tolist()),
    )


# ---------------------------------------------------------------------------
# Noise and reward regularity
# ---------------------------------------------------------------------------


def check_cdf_lipschitz(noise: NoiseSpec, pairs: int = 10**4, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    span = 1.5 * noise.B_xi
    a = rng.uniform(-span, span, pairs)
    # half the pairs are close together, where a Lipschitz break would show
    b = np.where(np.arange(pairs) % 2 == 0, rng.uniform(-span, span, pairs), a + rng.normal(0, 1e-3, pairs))
    lhs = np.abs(noise.cdf(a) - noise.cdf(b))
    rhs = noise.L_xi * np.abs(a - b) + 1e-12
    violations = int(np.sum(lhs > rhs))
    return CheckResult(f"cdf Lipschitz ({noise.kind})", violations == 0, f"{violations} violations / {pairs} pairs")


def check_reward_lipschitz(noise: NoiseSpec, pairs: int = 10**4, seed: int = 0, B_g: float = 1.0) -> CheckResult:
    """|pi(x, p) - pi(x, p')| <= B_y L_xi |p - p'| on [0, B_y]."""
    rng = np.random.default_rng(seed)
    B_y = B_g + noise.B_xi
    g = rng.uniform(-B_g, B_g, pairs)
    p = rng.uniform(0.0, B_y, pairs)
    q = np.where(np.arange(pairs) % 2 == 0, rng.uniform(0.0, B_y, pairs), np.clip(p + rng.normal(0, 1e-3, pairs), 0, B_y))
    lhs = np.abs(p * demand(noise, p - g) - q * demand(noise, q - g))
    rhs = B_y * noise.L_xi * np.abs(p - q) + 1e-12
    violations = int(np.sum(lhs > rhs))
    return CheckResult(
        f"reward Lipschitz ({noise.kind})", violations == 0, f"{violations} violations / {pairs} pairs"
    )


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


def uniform_price_estimate(noise: NoiseSpec, g_value: float, B_y: float, n: int, rng) -> float:
    """Mean of 2 B_y (o - 1/2) over ``n`` uniform prices on [-B_y, B_y]."""
    p = rng.uniform(-B_y, B_y, n)
    xi = noise.sample(rng, n)
    o = (p <= g_value + xi).astype(float)
    return float(np.mean(2.0 * B_y * (o - 0.5)))


def check_unbiasedness(pairs: int = 10, n: int = 10**6, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    for i in range(pairs):
        noise = reference_noises()[i % 2]
        d = int(rng.integers(1, 5))
        theta = rng.standard_normal(d)
        theta *= rng.uniform(0.1, 1.0) / np.linalg.norm(theta)
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        env = MarketEnv(
            noise=noise,
            valuation=ValuationModel.linear(theta, B_x=1.0, B_theta=1.0),
            contexts=ContextStream.iid_sphere(d),
        )
        g = env.g(x)
        tol = 4.0 * 2.0 * env.B_y / math.sqrt(n)
        err = abs(uniform_price_estimate(noise, g, env.B_y, n, rng) - g)
        worst = max(worst, err / tol)
        failures += err > tol
    return CheckResult(
        "uniform-price estimator unbiased",
        failures == 0,
        f"{failures}/{pairs} pairs outside 4*(2B_y)/sqrt(n); worst error {worst:.2f} x tolerance",
    )


def exact_valuation_coverage(
    env: MarketEnv, epsilon: float, alpha: float, T: int, seed: int, checkpoint_every: int
) -> tuple[int, int]:
    """Run price elimination with the true g(x) and count covered (k, checkpoint) pairs.

    Returns (covered, total) where a pair is covered when the true D(k eps) lies
    within D_hat_k +- sqrt(2 ln(1/alpha) / N_k).
    """
    grid = build_grid(epsilon, env.B_y)
    table = DemandTable.for_grid(grid)
    params = ConfidenceParams(alpha=alpha, L_xi=env.noise.L_xi, epsilon=epsilon, B_y=env.B_y)
    truth = demand(env.noise, grid.increments)
    ctx_rng, noise_rng, _ = run_streams(seed)
    log_inv = -math.log(alpha)
    covered = total = 0
    for t in range(1, T + 1):
        x = next_context(env.contexts, t, ctx_rng)
        g = env.g(x)
        k = eliminate_and_select(grid, table, g, params)
        update_demand(table, k, sale_at_value(env.noise, g, g + k * epsilon, noise_rng))
        if t % checkpoint_every == 0:
            played = table.counts > 0
            n = table.counts[played]
            width = np.sqrt(2.0 * log_inv / n)
            inside = np.abs(table.means[played] - truth[played]) <= width
            covered += int(inside.sum())
            total += int(played.sum())
    return covered, total


def check_confidence_coverage(
    seeds: int = 50, alpha: float = 1e-4, T: int = 5000, checkpoint_every: int = 500, threshold: float = 0.99
) -> CheckResult:
    env = stochastic_linear_env(0)
    epsilon = config_from_horizon(T, env.dim, LinearBounds.from_env(env)).epsilon
    covered = total = 0
    for s in range(seeds):
        c, n = exact_valuation_coverage(env, epsilon, alpha, T, seed=s, checkpoint_every=checkpoint_every)
        covered += c
        total += n
    frac = covered / total if total else 0.0
    return CheckResult(
        "demand confidence coverage",
        total > 0 and frac >= threshold,
        f"{covered}/{total} = {frac:.4f} of (k, checkpoint) pairs covered at alpha={alpha:g}",
    )


# ---------------------------------------------------------------------------
# Martingale Hoeffding
# ---------------------------------------------------------------------------


def simulate_adapted_means(n_sequences: int, t: int, seed: int, m: float = -0.5, M: float = 0.5):
    """Adapted sequences with centred increments in [m, M] and predictable inclusion.

    Inclusion is decided before each increment from the running sum (keep
    sampling while ahead, sample sparingly while behind), which is the
    optional-stopping pattern the bound has to survive.  Returns (N_t, mu_hat_t).
    """
    rng = np.random.default_rng(seed)
    total = np.zeros(n_sequences)
    count = np.zeros(n_sequences, dtype=np.int64)
    for _ in range(t):
        ahead = total >= 0
        include = ahead | (rng.random(n_sequences) < 0.2)
        # two-point increments at the ends of [m, M], zero conditional mean
        p_up = -m / (M - m)
        step = np.where(rng.random(n_sequences) < p_up, M, m)
        total += np.where(include, step, 0.0)
        count += include
    with np.errstate(invalid="ignore", divide="ignore"):
        mu_hat = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return count, mu_hat


def check_martingale_hoeffding(
    n_sequences: int = 10**4, t: int = 100, alpha: float = 0.01, seed: int = 0, slack: float = 1.5
) -> CheckResult:
    m, M = -0.5, 0.5
    count, mu_hat = simulate_adapted_means(n_sequences, t, seed, m, M)
    with np.errstate(invalid="ignore", divide="ignore"):
        radius = (M - m) * np.sqrt(math.log(1.0 / alpha) / (2.0 * count))
    exceed = (count >= 1) & (np.abs(mu_hat) > radius)
    freq = float(exceed.mean())
    bound = 2.0 * t * alpha * slack
    # per-level statement: P(N_t = l and deviation) <= 2 alpha
    worst_level = 0.0
    for level in np.unique(count[count >= 1]):
        worst_level = max(worst_level, float(np.mean(exceed & (count == level))))
    level_bound = 2.0 * alpha * slack
    passed = freq <= bound and worst_level <= level_bound
    return CheckResult(
        "martingale Hoeffding",
        passed,
        f"deviation frequency {freq:.4f} <= {bound:g}; worst per-N_t frequency {worst_level:.4f} <= {level_bound:g}",
    )


# ---------------------------------------------------------------------------
# Geometry and oracle
# ---------------------------------------------------------------------------


def sample_ball(rng, n: int, d: int, B_x: float) -> np.ndarray:
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return B_x * rng.random((n, 1)) ** (1.0 / d) * z


def covering_defects(B_x: float, d: int, radius: float, points: int, rng) -> tuple[int, bool, int]:
    """(uncovered sample points, cardinality bound respected, number of centres)."""
    cov = build_covering(B_x, d, radius)
    xs = sample_ball(rng, points, d, B_x)
    # include boundary points, where coverage is tightest
    xs[: points // 4] *= B_x / np.linalg.norm(xs[: points // 4], axis=1, keepdims=True)
    idx = np.array([nearest_center(cov, x) for x in xs])
    dist = np.linalg.norm(xs - cov.centers[idx], axis=1)
    uncovered = int(np.sum(dist > radius + 1e-12))
    return uncovered, len(cov) <= covering_cardinality_bound(B_x, d, radius), len(cov)


def check_covering_soundness(configs: int = 20, points: int = 10**4, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = []
    for _ in range(configs):
        d = int(rng.integers(1, 4))
        B_x = float(rng.uniform(0.5, 2.0))
        radius = float(rng.uniform(0.1, 0.8) * B_x)
        uncovered, card_ok, _ = covering_defects(B_x, d, radius, points, rng)
        if uncovered or not card_ok:
            bad.append((B_x, d, radius))
    return CheckResult(
        "covering soundness", not bad, f"{configs - len(bad)}/{configs} coverings sound and within the cardinality bound"
    )


def brute_force_optimum(noise: NoiseSpec, g_value: float, B_y: float, resolution: float = 1e-6) -> float:
    best = -math.inf
    chunk = 10**6
    n = int(round(B_y / resolution)) + 1
    for start in range(0, n, chunk):
        p = np.arange(start, min(start + chunk, n)) * resolution
        best = max(best, float(np.max(revenue_at_value(noise, g_value, p))))
    return best


def check_oracle(envs: int = 20, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(envs):
        noise = reference_noises()[i % 2]
        g = float(rng.uniform(-1.0, 1.0))
        B_y = 1.0 + noise.B_xi
        _, v = optimal_price_at_value(noise, g, B_y)
        worst = max(worst, abs(v - brute_force_optimum(noise, g, B_y)))
    p_star, v_star = optimal_price_at_value(NoiseSpec.uniform(-1, 1), 0.5, 2.0)
    closed_form = abs(p_star - 0.75) <= 1e-4 and abs(v_star - 0.28125) <= 1e-6
    return CheckResult(
        "optimal-price oracle",
        worst <= 1e-5 and closed_form,
        f"max gap to 1e-6 scan {worst:.2e}; uniform closed form p*={p_star:.6f}, pi*={v_star:.8f}",
    )


def run_selftest(quick: bool = False, report: Optional[Callable[[str], None]] = print) -> list[CheckResult]:
    """Run every check; ``quick`` shrinks the Monte-Carlo sizes for smoke testing."""
    checks: list[Callable[[], CheckResult]] = []
    for noise in reference_noises():
        checks.append(lambda noise=noise: check_cdf_lipschitz(noise))
        checks.append(lambda noise=noise: check_reward_lipschitz(noise))
    checks += [
        (lambda: check_unbiasedness(n=10**5 if quick else 10**6)),
        (lambda: check_confidence_coverage(seeds=5 if quick else 50, T=2000 if quick else 5000)),
        (lambda: check_martingale_hoeffding()),
        (lambda: check_covering_soundness(points=2000 if quick else 10**4)),
        (lambda: check_oracle(envs=4 if quick else 20)),
    ]
    results = []
    for fn in checks:
        res = fn()
        results.append(res)
        if report is not None:
            report(res.line())
    return results
