"""Bundled environment configs; ``path(name)`` returns the JSON file for ``name``."""

from pathlib import Path

NAMES = ("stochastic_linear", "adversarial_linear", "nonparam_1d")


def path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(NAMES)}")
    return Path(__file__).with_name(f"{name}.json")
