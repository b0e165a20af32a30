"""Per-round run records and seeded RNG plumbing shared by all policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXPLORE = 1
ELIMINATE = 0


class InvariantViolation(RuntimeError):
    """A guarantee that holds almost surely was broken; indicates a bug."""


def run_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (context, noise, policy) generators derived from one seed."""
    ctx, noise, policy = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(ctx), np.random.default_rng(noise), np.random.default_rng(policy)


@dataclass
class RunTrace:
    """Round-by-round record of one run.

    ``increment`` is NaN on rounds that did not play a grid increment and
    ``g_hat`` is NaN on rounds that did not use a valuation estimate.
    """

    phase: np.ndarray
    price: np.ndarray
    increment: np.ndarray
    regret: np.ndarray
    g_hat: np.ndarray
    g_true: np.ndarray

    @classmethod
    def empty(cls, T: int) -> "RunTrace":
        return cls(
            phase=np.zeros(T, dtype=np.int8),
            price=np.zeros(T),
            increment=np.full(T, np.nan),
            regret=np.zeros(T),
            g_hat=np.full(T, np.nan),
            g_true=np.zeros(T),
        )

    def __len__(self) -> int:
        return int(self.phase.size)

    @property
    def T(self) -> int:
        return len(self)

    @property
    def exploration_count(self) -> int:
        return int(self.phase.sum())

    @property
    def cumulative_regret(self) -> float:
        return float(self.regret.sum())

    def regret_curve(self) -> np.ndarray:
        return np.cumsum(self.regret)
