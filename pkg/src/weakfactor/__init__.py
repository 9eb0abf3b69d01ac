"""Estimation and inference in factor models of arbitrary strength.

Subpackages cover entrywise inference with one missing entry, panel
regression with interactive fixed effects, adversarial two-point
constructions with exact information-theoretic oracles, and a deterministic
Monte Carlo replication engine.
"""

__version__ = "0.1.0"
