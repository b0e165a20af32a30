"""VAPE for linear valuations.

Exploration is triggered by the elliptical norm of the context under the
ridge design matrix; exploration rounds post a uniform price in
``[-B_y, B_y]`` whose sale indicator, rescaled to ``2 B_y (o - 1/2)``, is an
unbiased observation of ``x . theta``.  All other rounds run price
elimination on the shared demand table.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .env import MarketEnv, next_context, optimal_price_at_value, revenue_at_value, sale_at_value
from .pricing import (
    ConfidenceParams,
    DemandTable,
    IncrementGrid,
    build_grid,
    eliminate_and_select,
    update_demand,
)
from .trace import ELIMINATE, EXPLORE, InvariantViolation, RunTrace, run_streams


@dataclass(frozen=True)
class LinearBounds:
    B_x: float
    B_theta: float
    B_xi: float
    L_xi: float

    @property
    def B_g(self) -> float:
        return self.B_x * self.B_theta

    @property
    def B_y(self) -> float:
        return self.B_g + self.B_xi

    @classmethod
    def from_env(cls, env: MarketEnv) -> "LinearBounds":
        if env.valuation.kind != "linear":
            raise ValueError("linear VAPE needs a linear-valuation environment")
        return cls(
            B_x=env.B_x, B_theta=env.valuation.B_theta, B_xi=env.noise.B_xi, L_xi=env.noise.L_xi
        )


@dataclass(frozen=True)
class LinearVapeConfig:
    T: int
    d: int
    epsilon: float
    mu: float
    alpha: float
    bounds: LinearBounds

    def __post_init__(self):
        for name in ("epsilon", "mu", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def exploration_budget(self) -> float:
        """Almost-sure cap on the number of exploration rounds."""
        d = self.d
        return d * math.log((self.T + d) / d) / self.mu**2

    @cached_property
    def confidence(self) -> ConfidenceParams:
        b = self.bounds
        return ConfidenceParams(alpha=self.alpha, L_xi=b.L_xi, epsilon=self.epsilon, B_y=b.B_y)


def config_from_horizon(T: int, d: int, bounds: LinearBounds) -> LinearVapeConfig:
    """Theoretical schedule: eps = (d^2 ln(T)^2 / T)^(1/3), alpha = T^-4 and
    mu = eps / (B_y sqrt(d ln((1 + B_x^2 T) / alpha)) + B_theta)."""
    if T < 2:
        raise ValueError(f"horizon must be at least 2, got {T}")
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    log_t = math.log(T)
    epsilon = (d**2 * log_t**2 / T) ** (1.0 / 3.0)
    alpha = float(T) ** -4
    # ln((1 + B_x^2 T) / alpha) = ln(1 + B_x^2 T) + 4 ln T, kept finite for large T
    log_term = math.log1p(bounds.B_x**2 * T) + 4.0 * log_t
    mu = epsilon / (bounds.B_y * math.sqrt(d * log_term) + bounds.B_theta)
    return LinearVapeConfig(T=T, d=d, epsilon=epsilon, mu=mu, alpha=alpha, bounds=bounds)


def elliptical_norm(V: np.ndarray, x: np.ndarray) -> float:
    """sqrt(x^T V^-1 x) through a Cholesky solve."""
    try:
        factor = cho_factor(V, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InvariantViolation("design matrix is not positive definite") from exc
    z = cho_solve(factor, x, check_finite=False)
    return math.sqrt(max(float(x @ z), 0.0))


@dataclass
class RidgeState:
    """V = I + sum of explored x x^T, b = sum of 2 B_y (o - 1/2) x, theta_hat = V^-1 b."""

    d: int
    V: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    theta_hat: np.ndarray = field(init=False)
    exploration_count: int = 0
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.V = np.eye(self.d)
        self.b = np.zeros(self.d)
        self.theta_hat = np.zeros(self.d)
        self._chol = np.eye(self.d)

    def norm(self, x: np.ndarray) -> float:
        """Elliptical norm of ``x`` using the cached Cholesky factor of V."""
        z = solve_triangular(self._chol, x, lower=True, check_finite=False)
        return math.sqrt(float(z @ z))

    def estimate(self, x: np.ndarray) -> float:
        return float(x @ self.theta_hat)


def explore_update(state: RidgeState, x: np.ndarray, o: int, B_y: float) -> RidgeState:
    """Add one uniform-price observation to the ridge estimate (in place)."""
    state.V = state.V + np.outer(x, x)
    state.b = state.b + 2.0 * B_y * (o - 0.5) * x
    try:
        state._chol = np.linalg.cholesky(state.V)
    except np.linalg.LinAlgError as exc:
        raise InvariantViolation("design matrix lost positive definiteness") from exc
    state.theta_hat = cho_solve((state._chol, True), state.b, check_finite=False)
    state.exploration_count += 1
    return state


def clamp(value: float, bound: float) -> float:
    return min(max(value, -bound), bound)


def act(
    state: RidgeState,
    x: np.ndarray,
    grid: IncrementGrid,
    table: DemandTable,
    config: LinearVapeConfig,
    rng: np.random.Generator,
) -> tuple[float, int, Optional[int]]:
    """Decide one round: returns (price, phase flag, increment index or None)."""
    B_y = config.bounds.B_y
    if state.norm(x) > config.mu:
        return float(rng.uniform(-B_y, B_y)), EXPLORE, None
    g_hat = clamp(state.estimate(x), config.bounds.B_g)
    k = eliminate_and_select(grid, table, g_hat, config.confidence)
    return g_hat + k * grid.epsilon, ELIMINATE, k


def run(env: MarketEnv, config: LinearVapeConfig, seed: int) -> RunTrace:
    """Play ``config.T`` rounds of linear VAPE against ``env``."""
    T = config.T
    trace = RunTrace.empty(T)
    bounds = config.bounds
    B_y = bounds.B_y
    grid = build_grid(config.epsilon, B_y)
    table = DemandTable.for_grid(grid)
    state = RidgeState(config.d)
    ctx_rng, noise_rng, policy_rng = run_streams(seed)
    noise = env.noise
    env_B_y = env.B_y

    for t in range(1, T + 1):
        x = next_context(env.contexts, t, ctx_rng)
        g = env.g(x)
        i = t - 1
        trace.g_true[i] = g
        p, phase, k = act(state, x, grid, table, config, policy_rng)
        o = sale_at_value(noise, g, p, noise_rng)
        if phase == EXPLORE:
            explore_update(state, x, o, B_y)
            trace.phase[i] = EXPLORE
        else:
            update_demand(table, k, o)
            trace.increment[i] = k
            trace.g_hat[i] = clamp(state.estimate(x), bounds.B_g)
        trace.price[i] = p
        trace.regret[i] = optimal_price_at_value(noise, g, env_B_y)[1] - revenue_at_value(noise, g, p)

    if state.exploration_count > config.exploration_budget:
        raise InvariantViolation(
            f"{state.exploration_count} exploration rounds exceed the budget "
            f"{config.exploration_budget:.1f}"
        )
    return trace
