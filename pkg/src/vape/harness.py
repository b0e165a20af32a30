"""Seeded experiment runner, regret aggregation and CSV output."""

from __future__ import annotations

import csv
import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import baselines, linear, nonparam
from .env import MarketEnv
from .envconfig import EnvConfig, load_env_config
from .trace import RunTrace

ALGORITHMS = ("vape_linear", "vape_nonparam", "etc")
CSV_HEADER = ("algorithm", "T", "repetition", "seed", "regret", "exploration_rounds", "seconds")
CURVE_HEADER = ("T", "mean_regret", "stderr", "theory_ref")


class RunFailure(RuntimeError):
    """A single run aborted; carries the (T, repetition, seed) that reproduces it."""

    def __init__(self, T: int, repetition: int, seed: int, cause: BaseException):
        super().__init__(f"run T={T} repetition={repetition} seed={seed} failed: {cause}")
        self.T, self.repetition, self.seed = T, repetition, seed


@dataclass(frozen=True)
class ExperimentSpec:
    algorithm: str
    env_config: str
    horizons: tuple
    repetitions: int
    base_seed: int = 0
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        hs = tuple(int(h) for h in self.horizons)
        if not hs:
            raise ValueError("at least one horizon is required")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError(f"horizons must be strictly increasing, got {list(hs)}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        object.__setattr__(self, "horizons", hs)


@dataclass(frozen=True)
class SummaryRecord:
    algorithm: str
    T: int
    repetition: int
    seed: int
    regret: float
    exploration_rounds: int
    seconds: float


def derive_seed(base_seed: int, T: int, repetition: int) -> int:
    """base_seed XOR a stable 63-bit hash of (T, repetition)."""
    digest = hashlib.blake2b(f"{T}:{repetition}".encode(), digest_size=8).digest()
    mask = (1 << 63) - 1
    return (int(base_seed) ^ int.from_bytes(digest, "big")) & mask


def run_algorithm(algorithm: str, env: MarketEnv, T: int, seed: int) -> RunTrace:
    """Build the horizon-dependent configuration for ``algorithm`` and run it."""
    if algorithm == "vape_linear":
        config = linear.config_from_horizon(T, env.dim, linear.LinearBounds.from_env(env))
        return linear.run(env, config, seed)
    if algorithm == "vape_nonparam":
        val = env.valuation
        if val.kind == "linear":
            L_g, beta = float(val.B_theta), 1.0
        else:
            L_g, beta = float(val.L_g), float(val.beta)
        config = nonparam.config_from_horizon(T, env.dim, beta, L_g, nonparam.NonparamBounds.from_env(env))
        return nonparam.run(env, config, seed)
    if algorithm == "etc":
        return baselines.etc_run(env, baselines.EtcConfig.from_horizon(T), seed)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run_single(algorithm: str, env_config: EnvConfig, T: int, repetition: int, seed: int) -> SummaryRecord:
    env = env_config.build(T)
    start = time.perf_counter()
    try:
        trace = run_algorithm(algorithm, env, T, seed)
    except Exception as exc:
        raise RunFailure(T, repetition, seed, exc) from exc
    return SummaryRecord(
        algorithm=algorithm,
        T=T,
        repetition=repetition,
        seed=seed,
        regret=trace.cumulative_regret,
        exploration_rounds=trace.exploration_count,
        seconds=time.perf_counter() - start,
    )


def _run_item(args) -> SummaryRecord:
    return run_single(*args)


def resolve_parallel(parallel: Optional[int]) -> int:
    """Worker count: explicit value, else the VAPE_PARALLEL variable, else 1."""
    if parallel is None:
        env_value = os.environ.get("VAPE_PARALLEL")
        parallel = int(env_value) if env_value else 1
    if parallel < 1:
        raise ValueError(f"parallel must be at least 1, got {parallel}")
    return parallel


def run_experiment(
    spec: ExperimentSpec, parallel: Optional[int] = None, env_config: Optional[EnvConfig] = None
) -> list[SummaryRecord]:
    """Run every (T, repetition) pair of ``spec``; records come back ordered by (T, repetition)."""
    if env_config is None:
        env_config = load_env_config(spec.env_config)
    items = [
        (spec.algorithm, env_config, T, rep, derive_seed(spec.base_seed, T, rep))
        for T in spec.horizons
        for rep in range(spec.repetitions)
    ]
    workers = resolve_parallel(parallel)
    if workers == 1:
        records = [_run_item(item) for item in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_item, items))
    records.sort(key=lambda r: (r.T, r.repetition))
    if spec.output_path:
        emit_csv(records, spec.output_path)
    return records


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares fit of ln(regret) = slope * ln(T) + intercept."""
    if len(points) < 2:
        raise ValueError("need at least two (T, regret) points")
    T = np.array([p[0] for p in points], dtype=float)
    R = np.array([p[1] for p in points], dtype=float)
    if np.any(R <= 0) or np.any(T <= 0):
        raise ValueError("log-log fit needs strictly positive horizons and regrets")
    slope, intercept = np.polyfit(np.log(T), np.log(R), 1)
    return float(slope), float(intercept)


def mean_regret_by_horizon(records: Iterable[SummaryRecord]) -> dict[int, list[float]]:
    grouped: dict[int, list[float]] = {}
    for r in records:
        grouped.setdefault(r.T, []).append(r.regret)
    return dict(sorted(grouped.items()))


def curve_rows(records: Iterable[SummaryRecord]) -> list[tuple[int, float, float, float]]:
    """(T, mean, standard error, reference C T^(2/3) ln(T)^(2/3)) per horizon.

    C is anchored so the reference passes through the smallest horizon's mean.
    """
    grouped = mean_regret_by_horizon(records)
    rows = []
    C = None
    for T, values in grouped.items():
        v = np.asarray(values, dtype=float)
        mean = float(v.mean())
        stderr = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        shape = T ** (2.0 / 3.0) * math.log(T) ** (2.0 / 3.0)
        if C is None:
            C = mean / shape if shape > 0 else 0.0
        rows.append((T, mean, stderr, C * shape))
    return rows


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _open_for_write(path):
    path = Path(path)
    try:
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_csv(records: Iterable[SummaryRecord], path) -> Path:
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.algorithm, r.T, r.repetition, r.seed, f"{r.regret:.6g}", r.exploration_rounds, f"{r.seconds:.6f}"]
            )
    return Path(path)


def read_csv(path) -> list[SummaryRecord]:
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            SummaryRecord(
                algorithm=row["algorithm"],
                T=int(row["T"]),
                repetition=int(row["repetition"]),
                seed=int(row["seed"]),
                regret=float(row["regret"]),
                exploration_rounds=int(row["exploration_rounds"]),
                seconds=float(row["seconds"]),
            )
            for row in reader
        ]


def emit_curve_csv(records: Iterable[SummaryRecord], path) -> Path:
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for T, mean, stderr, ref in curve_rows(records):
            writer.writerow([T, f"{mean:.6g}", f"{stderr:.6g}", f"{ref:.6g}"])
    return Path(path)
