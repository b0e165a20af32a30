"""Market simulator: contexts, hidden valuations, binary sale feedback.

The learner never touches ``MarketEnv`` internals directly; it only sees
contexts and the outcome of ``step``.  The expected-revenue and
optimal-price oracles exist for regret accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

ORACLE_COARSE_STEP = 1e-2

_STD_NORMAL = NormalDist()
_SQRT_HALF = math.sqrt(0.5)


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z * _SQRT_HALF))


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Bounded, centred noise law with closed-form c.d.f.

    Use the :meth:`uniform` and :meth:`truncated_gaussian` constructors rather
    than building instances by hand; they fill in ``B_xi`` and ``L_xi``.
    """

    kind: str
    lo: float
    hi: float
    mean: float = 0.0
    variance: Optional[float] = None
    B_xi: float = 0.0
    L_xi: float = 0.0

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "NoiseSpec":
        if not hi > lo:
            raise ValueError(f"uniform noise needs lo < hi, got ({lo}, {hi})")
        if not math.isclose(lo, -hi, abs_tol=1e-12):
            raise ValueError("uniform noise must be centred (lo = -hi)")
        return cls(
            kind="uniform",
            lo=float(lo),
            hi=float(hi),
            B_xi=max(abs(lo), abs(hi)),
            L_xi=1.0 / (hi - lo),
        )

    @classmethod
    def truncated_gaussian(
        cls, mean: float, variance: float, lo: float, hi: float
    ) -> "NoiseSpec":
        if variance <= 0:
            raise ValueError(f"variance must be positive, got {variance}")
        if not hi > lo:
            raise ValueError(f"truncation needs lo < hi, got ({lo}, {hi})")
        if not math.isclose(mean - lo, hi - mean, abs_tol=1e-12):
            raise ValueError("truncation must be symmetric about the mean")
        if not math.isclose(mean, 0.0, abs_tol=1e-12):
            raise ValueError("noise must be centred (mean = 0)")
        sigma = math.sqrt(variance)
        mass = float(ndtr((hi - mean) / sigma) - ndtr((lo - mean) / sigma))
        # density peaks at the mean, which lies inside [lo, hi]
        peak = 1.0 / (sigma * math.sqrt(2.0 * math.pi) * mass)
        return cls(
            kind="truncated_gaussian",
            lo=float(lo),
            hi=float(hi),
            mean=float(mean),
            variance=float(variance),
            B_xi=max(abs(lo), abs(hi)),
            L_xi=peak,
        )

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance) if self.variance is not None else float("nan")

    @cached_property
    def _trunc(self) -> tuple[float, float]:
        """Standard-normal c.d.f. at both truncation points."""
        s = self.sigma
        return _phi((self.lo - self.mean) / s), _phi((self.hi - self.mean) / s)

    def cdf(self, a):
        """P(xi <= a); accepts scalars or arrays."""
        if isinstance(a, (float, int)):
            if a <= self.lo:
                return 0.0
            if a >= self.hi:
                return 1.0
            if self.kind == "uniform":
                return (a - self.lo) / (self.hi - self.lo)
            f_lo, f_hi = self._trunc
            return min(max((_phi((a - self.mean) / self.sigma) - f_lo) / (f_hi - f_lo), 0.0), 1.0)
        a = np.asarray(a, dtype=float)
        if self.kind == "uniform":
            out = (a - self.lo) / (self.hi - self.lo)
        else:
            f_lo, f_hi = self._trunc
            out = (ndtr((a - self.mean) / self.sigma) - f_lo) / (f_hi - f_lo)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        """Draw noise by inverse-c.d.f. sampling (one uniform per draw)."""
        u = rng.random(size)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * u
        f_lo, f_hi = self._trunc
        q = f_lo + u * (f_hi - f_lo)
        if size is None:
            q = min(max(q, 1e-300), 1.0 - 1e-16)
            xi = self.mean + self.sigma * _STD_NORMAL.inv_cdf(q)
            return min(max(xi, self.lo), self.hi)
        xi = self.mean + self.sigma * ndtri(q)
        return np.clip(xi, self.lo, self.hi)


def demand(noise: NoiseSpec, delta):
    """Sale probability at increment ``delta``: P(xi >= delta) = 1 - F(delta)."""
    # F is continuous, so P(xi >= delta) = 1 - F(delta) exactly
    c = noise.cdf(delta)
    return 1.0 - c


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------

NONPARAMETRIC_FUNCTIONS = ("cos_radial", "power_radial", "first_coordinate")


@dataclass(frozen=True)
class ValuationModel:
    """Expected valuation g(x).

    ``kind`` is ``"linear"`` (g(x) = x.theta) or ``"nonparametric"`` with
    ``fn_id`` one of :data:`NONPARAMETRIC_FUNCTIONS`:

    * ``cos_radial``: B_g cos(pi |x|^2 / B_x^2), Lipschitz with L_g = 2 pi B_g / B_x
    * ``power_radial``: B_g (|x| / B_x)^beta, (B_g / B_x^beta, beta)-Holder
    * ``first_coordinate``: B_g x_0 / B_x, Lipschitz with L_g = B_g / B_x
    """

    kind: str
    B_g: float
    B_x: float = 1.0
    theta: Optional[tuple] = None
    B_theta: Optional[float] = None
    fn_id: Optional[str] = None
    L_g: Optional[float] = None
    beta: float = 1.0

    @classmethod
    def linear(cls, theta: Sequence[float], B_x: float, B_theta: Optional[float] = None):
        theta = tuple(float(v) for v in theta)
        norm = float(np.linalg.norm(theta))
        if B_theta is None:
            B_theta = norm
        if norm > B_theta + 1e-12:
            raise ValueError(f"|theta| = {norm:.6g} exceeds B_theta = {B_theta:.6g}")
        return cls(kind="linear", B_g=B_x * B_theta, B_x=B_x, theta=theta, B_theta=float(B_theta))

    @classmethod
    def nonparametric(cls, fn_id: str, B_g: float, B_x: float, beta: float = 1.0):
        if fn_id not in NONPARAMETRIC_FUNCTIONS:
            raise ValueError(f"unknown valuation function {fn_id!r}")
        if not 0 < beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {beta}")
        if fn_id == "cos_radial":
            L_g, beta = 2.0 * math.pi * B_g / B_x, 1.0
        elif fn_id == "power_radial":
            L_g = B_g / B_x**beta
        else:
            L_g, beta = B_g / B_x, 1.0
        return cls(kind="nonparametric", B_g=float(B_g), B_x=float(B_x), fn_id=fn_id, L_g=L_g, beta=beta)

    @property
    def dim(self) -> Optional[int]:
        return len(self.theta) if self.theta is not None else None

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return float(np.dot(x, self.theta))
        if self.fn_id == "cos_radial":
            return self.B_g * math.cos(math.pi * float(x @ x) / self.B_x**2)
        if self.fn_id == "power_radial":
            return self.B_g * (float(np.linalg.norm(x)) / self.B_x) ** self.beta
        return self.B_g * float(x[0]) / self.B_x


# ---------------------------------------------------------------------------
# Context streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContextStream:
    """Source of contexts.

    Variants: ``finite_pool_uniform`` (uniform over ``pool``), ``iid_sphere``
    (uniform on the sphere of radius B_x), ``iid_ball`` (uniform in the ball of
    radius B_x) and ``adversarial_two_phase`` (``first`` before
    ``switch_round``, ``second`` from then on).
    """

    kind: str
    B_x: float
    dim: int
    pool: Optional[tuple] = None
    first: Optional[tuple] = None
    second: Optional[tuple] = None
    switch_round: Optional[int] = None

    def __post_init__(self):
        for v in self._fixed_vectors():
            if np.linalg.norm(v) > self.B_x + 1e-12:
                raise ValueError(f"context {v} has norm above B_x = {self.B_x}")

    def _fixed_vectors(self):
        if self.pool is not None:
            yield from self.pool
        if self.first is not None:
            yield self.first
        if self.second is not None:
            yield self.second

    @classmethod
    def finite_pool_uniform(cls, pool, B_x: float = 1.0):
        pool = tuple(tuple(float(c) for c in v) for v in pool)
        if not pool:
            raise ValueError("context pool is empty")
        return cls(kind="finite_pool_uniform", B_x=B_x, dim=len(pool[0]), pool=pool)

    @classmethod
    def iid_sphere(cls, d: int, B_x: float = 1.0):
        return cls(kind="iid_sphere", B_x=B_x, dim=d)

    @classmethod
    def iid_ball(cls, d: int, B_x: float = 1.0):
        return cls(kind="iid_ball", B_x=B_x, dim=d)

    @classmethod
    def adversarial_two_phase(cls, first, second, switch_round: int, B_x: float = 1.0):
        first = tuple(float(c) for c in first)
        second = tuple(float(c) for c in second)
        return cls(
            kind="adversarial_two_phase",
            B_x=B_x,
            dim=len(first),
            first=first,
            second=second,
            switch_round=int(switch_round),
        )

    def with_switch_round(self, switch_round: int) -> "ContextStream":
        return ContextStream(**{**self.__dict__, "switch_round": int(switch_round)})


def next_context(stream: ContextStream, t: int, rng: np.random.Generator) -> np.ndarray:
    """Context for round ``t`` (1-based)."""
    if t < 1:
        raise ValueError(f"rounds are 1-based, got t={t}")
    kind = stream.kind
    if kind == "finite_pool_uniform":
        return np.array(stream.pool[int(rng.integers(len(stream.pool)))])
    if kind == "adversarial_two_phase":
        return np.array(stream.first if t < stream.switch_round else stream.second)
    z = rng.standard_normal(stream.dim)
    z /= np.linalg.norm(z)
    if kind == "iid_sphere":
        return stream.B_x * z
    if kind == "iid_ball":
        return stream.B_x * rng.random() ** (1.0 / stream.dim) * z
    raise ValueError(f"unknown context stream {kind!r}")


# ---------------------------------------------------------------------------
# Market
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarketEnv:
    noise: NoiseSpec
    valuation: ValuationModel
    contexts: ContextStream
    B_y: float = field(init=False)

    def __post_init__(self):
        if self.contexts.B_x > self.valuation.B_x + 1e-12:
            raise ValueError("context bound exceeds the bound assumed by the valuation model")
        if self.valuation.kind == "linear" and self.valuation.dim != self.contexts.dim:
            raise ValueError(
                f"theta has dimension {self.valuation.dim}, contexts have {self.contexts.dim}"
            )
        object.__setattr__(self, "B_y", self.valuation.B_g + self.noise.B_xi)

    @property
    def B_x(self) -> float:
        return self.contexts.B_x

    @property
    def B_g(self) -> float:
        return self.valuation.B_g

    @property
    def dim(self) -> int:
        return self.contexts.dim

    def g(self, x) -> float:
        return self.valuation(x)


def expected_revenue(env: MarketEnv, x, p):
    """p * D(p - g(x)); negative for negative prices that sell."""
    return revenue_at_value(env.noise, env.g(x), p)


def revenue_at_value(noise: NoiseSpec, g_value: float, p):
    if isinstance(p, float):
        return p * (1.0 - noise.cdf(p - g_value))
    p = np.asarray(p, dtype=float)
    out = p * demand(noise, p - g_value)
    return float(out) if np.ndim(out) == 0 else out


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@lru_cache(maxsize=65536)
def _optimal_price_cached(noise: NoiseSpec, g_value: float, B_y: float):
    """Coarse scan, then golden-section search inside the bracketing cells.

    Both noise laws have log-concave survival functions, so p * D(p - g) is
    unimodal on [0, B_y] and the bracket around the best coarse point holds
    the global maximiser.  The search stops once the bracket is narrower
    than 1e-10.
    """
    n = max(2, int(math.ceil(B_y / ORACLE_COARSE_STEP)))
    grid = np.linspace(0.0, B_y, n + 1)
    values = revenue_at_value(noise, g_value, grid)
    i = int(np.argmax(values))
    best_p, best_v = float(grid[i]), float(values[i])
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, n)])
    f = lambda p: p * (1.0 - noise.cdf(p - g_value))  # noqa: E731
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > 1e-10:
        if fc < fd:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
        else:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
    p_ref = 0.5 * (lo + hi)
    v_ref = f(p_ref)
    if v_ref > best_v:
        best_p, best_v = p_ref, v_ref
    return best_p, best_v


def optimal_price(env: MarketEnv, x) -> tuple[float, float]:
    """(p*, pi*) maximising expected revenue over [0, B_y]."""
    return optimal_price_at_value(env.noise, env.g(x), env.B_y)


def optimal_price_at_value(noise: NoiseSpec, g_value: float, B_y: float) -> tuple[float, float]:
    return _optimal_price_cached(noise, float(g_value), float(B_y))


def step(env: MarketEnv, x, p: float, rng: np.random.Generator) -> int:
    """Post price ``p``; returns 1 iff the buyer's valuation is at least ``p``."""
    xi = float(env.noise.sample(rng))
    return int(p <= env.g(x) + xi)


def sale_at_value(noise: NoiseSpec, g_value: float, p: float, rng: np.random.Generator) -> int:
    """``step`` for callers that already hold g(x)."""
    return int(p <= g_value + float(noise.sample(rng)))
