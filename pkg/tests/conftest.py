"""Shared helpers; long experiments are cached so several tests can reuse one run."""

from functools import lru_cache

import numpy as np
import pytest

from vape import harness, scenarios
from vape.envconfig import load_env_config

STOCHASTIC_HORIZONS = (2000, 8000, 32000, 128000)


@lru_cache(maxsize=None)
def experiment(algorithm: str, scenario: str, horizons: tuple, reps: int, base_seed: int = 0):
    spec = harness.ExperimentSpec(
        algorithm=algorithm,
        env_config=str(scenarios.path(scenario)),
        horizons=horizons,
        repetitions=reps,
        base_seed=base_seed,
    )
    return tuple(harness.run_experiment(spec))


def mean_by_T(records) -> dict:
    return {T: float(np.mean(v)) for T, v in harness.mean_regret_by_horizon(records).items()}


@pytest.fixture(scope="session")
def stochastic_env_config():
    return load_env_config(scenarios.path("stochastic_linear"))


@pytest.fixture(scope="session")
def adversarial_env_config():
    return load_env_config(scenarios.path("adversarial_linear"))


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
