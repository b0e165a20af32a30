"""Price elimination shared by every VAPE variant.

A single :class:`DemandTable` is indexed by price increment and pooled over
all contexts; each elimination round restricts attention to the increments
whose posted price lands in ``[0, B_y]``, drops the ones whose upper reward
bound sits below the best lower bound, and plays the least-sampled survivor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


class ContractViolation(RuntimeError):
    """A documented precondition of the elimination machinery was broken."""


@dataclass(frozen=True)
class IncrementGrid:
    epsilon: float
    K: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @property
    def increments(self) -> np.ndarray:
        return self.indices * self.epsilon

    def __len__(self) -> int:
        return 2 * self.K + 1


def build_grid(epsilon: float, B_y: float) -> IncrementGrid:
    """Increments k * epsilon for k in [-K, K], K = ceil((B_y + 1) / epsilon)."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not B_y > 0:
        raise ValueError(f"B_y must be positive, got {B_y}")
    return IncrementGrid(epsilon=float(epsilon), K=int(math.ceil((B_y + 1.0) / epsilon)))


@dataclass
class DemandTable:
    """Per-increment play counts and running-mean sale frequencies."""

    K: int
    counts: np.ndarray = field(init=False)
    means: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.zeros(2 * self.K + 1, dtype=np.int64)
        self.means = np.zeros(2 * self.K + 1, dtype=float)

    @classmethod
    def for_grid(cls, grid: IncrementGrid) -> "DemandTable":
        return cls(grid.K)

    def n(self, k: int) -> int:
        return int(self.counts[k + self.K])

    def d_hat(self, k: int) -> float:
        return float(self.means[k + self.K])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def update_demand(table: DemandTable, k: int, o: int) -> DemandTable:
    """Fold observation ``o`` into the running mean of increment ``k`` (in place)."""
    if not -table.K <= k <= table.K:
        raise ContractViolation(f"increment index {k} outside [-{table.K}, {table.K}]")
    i = k + table.K
    n = table.counts[i]
    table.means[i] = (n * table.means[i] + o) / (n + 1)
    table.counts[i] = n + 1
    return table


@dataclass(frozen=True)
class ConfidenceParams:
    alpha: float
    L_xi: float
    epsilon: float
    B_y: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def log_inv_alpha(self) -> float:
        return -math.log(self.alpha)

    @property
    def bias(self) -> float:
        return 2.0 * self.L_xi * self.epsilon


@dataclass(frozen=True)
class RewardBounds:
    """Confidence bounds for a set of increments, aligned with ``ks``."""

    ks: np.ndarray
    lcb: np.ndarray
    ucb: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Mapping[int, tuple[float, float]]) -> "RewardBounds":
        ks = np.array(sorted(pairs), dtype=np.int64)
        lcb = np.array([pairs[k][0] for k in ks], dtype=float)
        ucb = np.array([pairs[k][1] for k in ks], dtype=float)
        return cls(ks, lcb, ucb)

    def as_dict(self) -> dict[int, tuple[float, float]]:
        return {int(k): (float(l), float(u)) for k, l, u in zip(self.ks, self.lcb, self.ucb)}


def active_range(grid: IncrementGrid, g_hat: float, B_y: float) -> tuple[int, int]:
    """Inclusive index range {k : g_hat + k eps in [0, B_y]} (may be empty)."""
    eps = grid.epsilon
    lo = math.ceil(-g_hat / eps)
    hi = math.floor((B_y - g_hat) / eps)
    # repair floating-point rounding at the two edges
    while g_hat + lo * eps < 0:
        lo += 1
    while g_hat + (lo - 1) * eps >= 0:
        lo -= 1
    while g_hat + hi * eps > B_y:
        hi -= 1
    while g_hat + (hi + 1) * eps <= B_y:
        hi += 1
    return max(lo, -grid.K), min(hi, grid.K)


def active_set(grid: IncrementGrid, g_hat: float, B_y: float) -> np.ndarray:
    """Increment indices whose posted price lies in ``[0, B_y]``, ascending."""
    lo, hi = active_range(grid, g_hat, B_y)
    if lo > hi:
        raise ContractViolation(
            f"empty active set for g_hat={g_hat!r}; estimate was not clamped to [-B_g, B_g]"
        )
    return np.arange(lo, hi + 1)


def reward_bounds_many(
    table: DemandTable, ks: np.ndarray, g_hat: float, params: ConfidenceParams
) -> RewardBounds:
    idx = ks + table.K
    n = table.counts[idx]
    played = n > 0
    slack = np.sqrt(2.0 * params.log_inv_alpha / np.maximum(n, 1)) + params.bias
    price = g_hat + ks * params.epsilon
    d_hat = table.means[idx]
    ucb = np.where(played, price * (d_hat + slack), np.inf)
    lcb = np.where(played, price * (d_hat - slack), -np.inf)
    return RewardBounds(ks, lcb, ucb)


def reward_bounds(
    table: DemandTable, k: int, g_hat: float, params: ConfidenceParams
) -> tuple[float, float]:
    """(LCB, UCB) on the expected revenue of price ``g_hat + k eps``.

    Both are infinite while ``k`` is unplayed, so it can neither be eliminated
    nor lose the least-played contest.
    """
    b = reward_bounds_many(table, np.array([k]), g_hat, params)
    return float(b.lcb[0]), float(b.ucb[0])


def surviving_set(active: np.ndarray, bounds: RewardBounds) -> np.ndarray:
    """Active increments whose UCB reaches the best LCB among the active set."""
    active = np.asarray(active)
    if active.size == 0:
        raise ContractViolation("surviving_set called with an empty active set")
    pos = np.searchsorted(bounds.ks, active)
    if np.any(pos >= bounds.ks.size) or np.any(bounds.ks[np.minimum(pos, bounds.ks.size - 1)] != active):
        raise ContractViolation("bounds missing for some active increments")
    lcb, ucb = bounds.lcb[pos], bounds.ucb[pos]
    return active[ucb >= lcb.max()]


def select_increment(surviving: np.ndarray, table: DemandTable) -> int:
    """Least-played survivor; ties go to the smallest index."""
    surviving = np.sort(np.asarray(surviving))
    if surviving.size == 0:
        raise ContractViolation("no surviving increment")
    counts = table.counts[surviving + table.K]
    return int(surviving[int(np.argmin(counts))])


def eliminate_and_select(
    grid: IncrementGrid, table: DemandTable, g_hat: float, params: ConfidenceParams
) -> int:
    """One full price-elimination decision for the current estimate ``g_hat``."""
    ks = active_set(grid, g_hat, params.B_y)
    bounds = reward_bounds_many(table, ks, g_hat, params)
    keep = bounds.ucb >= bounds.lcb.max()
    survivors = ks[keep]
    counts = table.counts[survivors + table.K]
    return int(survivors[int(np.argmin(counts))])
