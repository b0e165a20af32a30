"""Explore-then-commit baseline.

Phase 1 alternates between uniform-price rounds, which feed the same ridge
estimator as linear VAPE, and demand rounds, which post ``g_hat + delta_k``
round-robin over the whole increment grid.  Phase 2 never learns again: it
posts the greedy price under the frozen estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import MarketEnv, next_context, optimal_price_at_value, revenue_at_value, sale_at_value
from .linear import RidgeState, clamp, explore_update
from .pricing import DemandTable, IncrementGrid, active_set, build_grid, update_demand
from .trace import EXPLORE, RunTrace, run_streams


@dataclass(frozen=True)
class EtcConfig:
    T: int
    grid_size: int
    precision: float
    exploration_length: int

    @classmethod
    def from_horizon(cls, T: int) -> "EtcConfig":
        """precision = 1 / grid_size ~ T^(-1/4); exploration lasts precision^-2 * grid_size."""
        if T < 1:
            raise ValueError(f"horizon must be positive, got {T}")
        grid_size = max(1, math.ceil(T**0.25 - 1e-9))
        precision = 1.0 / grid_size
        return cls(
            T=T,
            grid_size=grid_size,
            precision=precision,
            exploration_length=math.ceil(grid_size / precision**2 - 1e-9),
        )


def greedy_increment(grid: IncrementGrid, table: DemandTable, g_hat: float, B_y: float) -> int:
    """Active increment maximising (g_hat + delta_k) * D_hat_k; smallest index on ties."""
    ks = active_set(grid, g_hat, B_y)
    est = (g_hat + ks * grid.epsilon) * table.means[ks + table.K]
    return int(ks[int(np.argmax(est))])


def etc_run(env: MarketEnv, config: EtcConfig, seed: int) -> RunTrace:
    if env.valuation.kind != "linear":
        raise ValueError("explore-then-commit needs a linear-valuation environment")
    T = config.T
    trace = RunTrace.empty(T)
    B_y, B_g = env.B_y, env.B_g
    grid = build_grid(config.precision, B_y)
    table = DemandTable.for_grid(grid)
    ks_all = grid.indices
    state = RidgeState(env.dim)
    ctx_rng, noise_rng, policy_rng = run_streams(seed)
    noise = env.noise
    demand_turn = 0

    for t in range(1, T + 1):
        x = next_context(env.contexts, t, ctx_rng)
        g = env.g(x)
        i = t - 1
        trace.g_true[i] = g
        if t <= config.exploration_length:
            trace.phase[i] = EXPLORE
            if t % 2 == 1:
                p = float(policy_rng.uniform(-B_y, B_y))
                o = sale_at_value(noise, g, p, noise_rng)
                explore_update(state, x, o, B_y)
            else:
                k = int(ks_all[demand_turn % ks_all.size])
                demand_turn += 1
                g_hat = clamp(state.estimate(x), B_g)
                p = g_hat + k * grid.epsilon
                o = sale_at_value(noise, g, p, noise_rng)
                update_demand(table, k, o)
                trace.increment[i] = k
                trace.g_hat[i] = g_hat
        else:
            g_hat = clamp(state.estimate(x), B_g)
            k = greedy_increment(grid, table, g_hat, B_y)
            p = g_hat + k * grid.epsilon
            trace.increment[i] = k
            trace.g_hat[i] = g_hat
        trace.price[i] = p
        trace.regret[i] = optimal_price_at_value(noise, g, B_y)[1] - revenue_at_value(noise, g, p)
    return trace
