"""VAPE for Holder-continuous valuations.

Contexts are rounded to the nearest centre of a lattice covering of the
ball of radius ``B_x``.  Each centre collects ``ceil(tau)`` uniform-price
observations to estimate its valuation; afterwards its rounds go to the
shared price-elimination table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .env import MarketEnv, next_context, optimal_price_at_value, revenue_at_value, sale_at_value
from .linear import clamp
from .pricing import ConfidenceParams, DemandTable, build_grid, eliminate_and_select, update_demand
from .trace import EXPLORE, InvariantViolation, RunTrace, run_streams

DEFAULT_MAX_CENTERS = 10**7


class CoveringTooLarge(ValueError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"covering needs {required} centres, above the cap of {cap}")
        self.required = required
        self.cap = cap


def covering_cardinality_bound(B_x: float, d: int, radius: float) -> float:
    """Upper bound (2 B_x / r + 1)^d on a minimal r-covering of the ball."""
    return (2.0 * B_x / radius + 1.0) ** d


@dataclass(frozen=True)
class Covering:
    """Axis-aligned lattice covering of the ball of radius ``B_x``.

    ``offset`` and ``spacing`` describe the lattice coordinates
    ``offset + i * spacing`` for ``i`` in ``[0, per_axis)``; ``lookup`` maps the
    flat lattice index of each retained point to its position in ``centers``.
    """

    centers: np.ndarray
    radius: float
    B_x: float
    spacing: float
    offset: float
    per_axis: int
    lookup: Optional[np.ndarray]

    @property
    def d(self) -> int:
        return int(self.centers.shape[1])

    def __len__(self) -> int:
        return int(self.centers.shape[0])


def build_covering(
    B_x: float, d: int, radius: float, max_centers: int = DEFAULT_MAX_CENTERS
) -> Covering:
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if radius >= B_x:
        return Covering(
            centers=np.zeros((1, d)), radius=radius, B_x=B_x, spacing=0.0, offset=0.0,
            per_axis=1, lookup=None,
        )
    spacing = 2.0 * radius / math.sqrt(d)
    per_axis = math.ceil(2.0 * B_x / spacing) + 1
    if per_axis**d > max_centers:
        raise CoveringTooLarge(per_axis**d, max_centers)
    offset = -0.5 * (per_axis - 1) * spacing
    axis = offset + spacing * np.arange(per_axis)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.linalg.norm(mesh, axis=1) <= B_x + radius + 1e-12
    lookup = np.full(mesh.shape[0], -1, dtype=np.int64)
    lookup[keep] = np.arange(int(keep.sum()))
    return Covering(
        centers=mesh[keep], radius=radius, B_x=B_x, spacing=spacing, offset=offset,
        per_axis=per_axis, lookup=lookup,
    )


def nearest_center_scan(covering: Covering, x) -> int:
    """Brute-force nearest centre (first index on ties)."""
    dist = np.linalg.norm(covering.centers - np.asarray(x, dtype=float), axis=1)
    return int(np.argmin(dist))


def nearest_center(covering: Covering, x) -> int:
    """Index of the centre closest to ``x``.

    For a cubic lattice the Euclidean nearest point is the coordinate-wise
    rounding, and for ``|x| <= B_x`` that point is always retained.
    """
    if covering.lookup is None:
        return 0
    x = np.asarray(x, dtype=float)
    idx = np.clip(np.rint((x - covering.offset) / covering.spacing), 0, covering.per_axis - 1)
    flat = int(np.ravel_multi_index(idx.astype(np.int64), (covering.per_axis,) * covering.d))
    j = int(covering.lookup[flat])
    if j < 0:
        return nearest_center_scan(covering, x)
    return j


@dataclass
class CellState:
    count: int = 0
    sales: int = 0

    def mean_estimate(self, B_y: float) -> float:
        return 2.0 * B_y * (self.sales - 0.5 * self.count) / self.count


def cell_update(cell: CellState, o: int, B_y: float) -> CellState:
    """Record one uniform-price observation for this cell (in place)."""
    cell.count += 1
    cell.sales += int(o)
    return cell


@dataclass(frozen=True)
class NonparamBounds:
    B_x: float
    B_g: float
    B_xi: float
    L_xi: float

    @property
    def B_y(self) -> float:
        return self.B_g + self.B_xi

    @classmethod
    def from_env(cls, env: MarketEnv) -> "NonparamBounds":
        return cls(B_x=env.B_x, B_g=env.B_g, B_xi=env.noise.B_xi, L_xi=env.noise.L_xi)


@dataclass(frozen=True)
class NonparamConfig:
    T: int
    d: int
    beta: float
    L_g: float
    epsilon: float
    tau: float
    alpha: float
    bounds: NonparamBounds
    covering: Covering

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError(f"per-cell exploration budget must be at least 1, got {self.tau}")

    @property
    def radius(self) -> float:
        return self.covering.radius

    @property
    def cell_budget(self) -> int:
        return math.ceil(self.tau)

    @property
    def exploration_budget(self) -> float:
        return len(self.covering) * (self.tau + 1)

    @cached_property
    def confidence(self) -> ConfidenceParams:
        b = self.bounds
        return ConfidenceParams(alpha=self.alpha, L_xi=b.L_xi, epsilon=self.epsilon, B_y=b.B_y)


def cell_threshold(B_y: float, n_centers: int, alpha: float, epsilon: float) -> float:
    """Per-cell exploration budget tau = 18 B_y^2 ln(2 n_centers / alpha) / eps^2."""
    return 18.0 * B_y**2 * (math.log(2.0 * n_centers) - math.log(alpha)) / epsilon**2


def config_from_horizon(
    T: int,
    d: int,
    beta: float,
    L_g: float,
    bounds: NonparamBounds,
    max_centers: int = DEFAULT_MAX_CENTERS,
) -> NonparamConfig:
    """Theoretical schedule: eps = (T / ln T)^(-beta / (d + 3 beta)), alpha = T^-4,
    covering radius (eps / 3 L_g)^(1 / beta) and
    tau = 18 B_y^2 ln(2 |centres| / alpha) / eps^2."""
    if T < 2:
        raise ValueError(f"horizon must be at least 2, got {T}")
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    log_t = math.log(T)
    epsilon = (T / log_t) ** (-beta / (d + 3.0 * beta))
    alpha = float(T) ** -4
    radius = (epsilon / (3.0 * L_g)) ** (1.0 / beta)
    covering = build_covering(bounds.B_x, d, radius, max_centers=max_centers)
    tau = cell_threshold(bounds.B_y, len(covering), alpha, epsilon)
    return NonparamConfig(
        T=T, d=d, beta=beta, L_g=L_g, epsilon=epsilon, tau=tau, alpha=alpha,
        bounds=bounds, covering=covering,
    )


def run(env: MarketEnv, config: NonparamConfig, seed: int) -> RunTrace:
    """Play ``config.T`` rounds of covering-based VAPE against ``env``."""
    T = config.T
    trace = RunTrace.empty(T)
    B_y, B_g = config.bounds.B_y, config.bounds.B_g
    grid = build_grid(config.epsilon, B_y)
    table = DemandTable.for_grid(grid)
    params = config.confidence
    budget = config.cell_budget
    cells: dict[int, CellState] = {}
    ctx_rng, noise_rng, policy_rng = run_streams(seed)
    noise = env.noise
    env_B_y = env.B_y
    explored = 0

    for t in range(1, T + 1):
        x = next_context(env.contexts, t, ctx_rng)
        g = env.g(x)
        i = t - 1
        trace.g_true[i] = g
        j = nearest_center(config.covering, x)
        cell = cells.get(j)
        if cell is None:
            cell = cells[j] = CellState()
        if cell.count < budget:
            p = float(policy_rng.uniform(-B_y, B_y))
            o = sale_at_value(noise, g, p, noise_rng)
            cell_update(cell, o, B_y)
            trace.phase[i] = EXPLORE
            explored += 1
        else:
            g_hat = clamp(cell.mean_estimate(B_y), B_g)
            k = eliminate_and_select(grid, table, g_hat, params)
            p = g_hat + k * grid.epsilon
            o = sale_at_value(noise, g, p, noise_rng)
            update_demand(table, k, o)
            trace.increment[i] = k
            trace.g_hat[i] = g_hat
        trace.price[i] = p
        trace.regret[i] = optimal_price_at_value(noise, g, env_B_y)[1] - revenue_at_value(noise, g, p)

    if explored > config.exploration_budget:
        raise InvariantViolation(
            f"{explored} exploration rounds exceed the budget {config.exploration_budget:.1f}"
        )
    return trace
