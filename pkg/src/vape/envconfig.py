"""JSON environment descriptions.

Schema (all keys at top level)::

    {
      "seed": 0,                      # drives every "random_unit" entry below
      "noise": {"kind": "uniform", "lo": -1, "hi": 1}
             | {"kind": "truncated_gaussian", "mean": 0, "variance": 0.1, "lo": -1, "hi": 1},
      "valuation": {"kind": "linear", "theta": [0.3, 0.3, 0.3] | "random_unit"}
                 | {"kind": "nonparametric", "function": "cos_radial" | "power_radial"
                    | "first_coordinate", "B_g": 1.0, "beta": 1.0},
      "contexts": {"kind": "finite_pool_uniform", "pool": [[...], ...]
                    | "random_unit", "size": 5, "dim": 3}
                | {"kind": "iid_sphere", "dim": 3}
                | {"kind": "iid_ball", "dim": 1}
                | {"kind": "adversarial_two_phase", "first": [...], "second": [...],
                   "switch_round": 100 | "etc"},
      "bounds": {"B_x": 1.0, "B_theta": 1.0}
    }

Random entries are drawn from ``numpy.random.default_rng(seed)``, the context
pool first, then theta.  ``"switch_round": "etc"`` switches contexts on the
first round after the explore-then-commit exploration phase for the horizon
being run.  ``B_theta`` defaults to ``|theta|``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .baselines import EtcConfig
from .env import ContextStream, MarketEnv, NoiseSpec, ValuationModel


class ConfigError(ValueError):
    pass


def _unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing key {key!r}")
    return section[key]


def _noise(cfg: dict) -> NoiseSpec:
    kind = _require(cfg, "kind", "noise")
    if kind == "uniform":
        return NoiseSpec.uniform(float(cfg["lo"]), float(cfg["hi"]))
    if kind == "truncated_gaussian":
        return NoiseSpec.truncated_gaussian(
            float(cfg.get("mean", 0.0)), float(cfg["variance"]), float(cfg["lo"]), float(cfg["hi"])
        )
    raise ConfigError(f"noise: unknown kind {kind!r}")


@dataclass(frozen=True)
class EnvConfig:
    """Validated environment description; ``build(T)`` returns the market for horizon T."""

    raw: dict
    noise: NoiseSpec
    valuation: ValuationModel
    contexts: ContextStream
    switch_from_etc: bool = False

    def build(self, T: Optional[int] = None) -> MarketEnv:
        contexts = self.contexts
        if self.switch_from_etc:
            if T is None:
                raise ConfigError("contexts: switch_round 'etc' needs a horizon")
            contexts = contexts.with_switch_round(EtcConfig.from_horizon(T).exploration_length + 1)
        return MarketEnv(noise=self.noise, valuation=self.valuation, contexts=contexts)


def parse_env_config(cfg: dict[str, Any]) -> EnvConfig:
    try:
        return _parse(cfg)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid environment config: {exc}") from exc


def _parse(cfg: dict[str, Any]) -> EnvConfig:
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    noise = _noise(_require(cfg, "noise", "config"))
    bounds = cfg.get("bounds", {})
    B_x = float(bounds.get("B_x", 1.0))

    ctx = _require(cfg, "contexts", "config")
    kind = _require(ctx, "kind", "contexts")
    switch_from_etc = False
    if kind == "finite_pool_uniform":
        pool = _require(ctx, "pool", "contexts")
        if pool == "random_unit":
            pool = B_x * _unit_vectors(rng, int(ctx.get("size", 5)), int(_require(ctx, "dim", "contexts")))
        contexts = ContextStream.finite_pool_uniform(np.asarray(pool, dtype=float).tolist(), B_x=B_x)
    elif kind == "iid_sphere":
        contexts = ContextStream.iid_sphere(int(_require(ctx, "dim", "contexts")), B_x=B_x)
    elif kind == "iid_ball":
        contexts = ContextStream.iid_ball(int(_require(ctx, "dim", "contexts")), B_x=B_x)
    elif kind == "adversarial_two_phase":
        switch = _require(ctx, "switch_round", "contexts")
        switch_from_etc = switch == "etc"
        contexts = ContextStream.adversarial_two_phase(
            _require(ctx, "first", "contexts"),
            _require(ctx, "second", "contexts"),
            switch_round=1 if switch_from_etc else int(switch),
            B_x=B_x,
        )
    else:
        raise ConfigError(f"contexts: unknown kind {kind!r}")

    val = _require(cfg, "valuation", "config")
    vkind = _require(val, "kind", "valuation")
    if vkind == "linear":
        theta = _require(val, "theta", "valuation")
        if theta == "random_unit":
            theta = _unit_vectors(rng, 1, contexts.dim)[0]
        B_theta = bounds.get("B_theta")
        valuation = ValuationModel.linear(
            theta, B_x=B_x, B_theta=None if B_theta is None else float(B_theta)
        )
    elif vkind == "nonparametric":
        valuation = ValuationModel.nonparametric(
            _require(val, "function", "valuation"),
            B_g=float(val.get("B_g", 1.0)),
            B_x=B_x,
            beta=float(val.get("beta", 1.0)),
        )
    else:
        raise ConfigError(f"valuation: unknown kind {vkind!r}")

    env_cfg = EnvConfig(
        raw=cfg, noise=noise, valuation=valuation, contexts=contexts, switch_from_etc=switch_from_etc
    )
    env_cfg.build(T=2)  # surfaces cross-field errors early
    return env_cfg


def load_env_config(path) -> EnvConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read environment config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_env_config(cfg)
