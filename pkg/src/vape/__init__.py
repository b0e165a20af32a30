"""Contextual posted-price learning with valuation approximation and price elimination.

Modules: ``env`` (market simulator and regret oracle), ``pricing`` (shared
price-elimination machinery), ``linear`` and ``nonparam`` (the two learners),
``baselines`` (explore-then-commit), ``harness`` (seeded experiments, CSV
output) and ``checks`` (Monte-Carlo checks behind ``vape selftest``).
"""

__version__ = "0.1.0"
