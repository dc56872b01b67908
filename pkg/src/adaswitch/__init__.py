"""Comparator-adaptive online learning with switching costs.

Modules:

- ``potential``: the erfi-based potential, its derivatives and residuals
- ``scalar``: one-dimensional learners (potential, betting baseline,
  constrained, doubling, gradient-adaptive wrapper)
- ``vector``: coordinate-wise learner and the experts learner on the simplex
- ``harness``: adversaries, regret ledgers, bound checks, invariant sweeps
- ``portfolio``: synthetic markets, price CSVs and backtests
- ``cli``: the ``adaswitch`` command
"""
from .potential import LearnerConfig, PotentialRangeError
from .scalar import BaselineLearner, DoublingLearner, PotentialLearner
from .vector import CoordinateOLO, LEALearner, SimplexPoint

__version__ = "0.1.0"

__all__ = [
    "BaselineLearner",
    "CoordinateOLO",
    "DoublingLearner",
    "LEALearner",
    "LearnerConfig",
    "PotentialLearner",
    "PotentialRangeError",
    "SimplexPoint",
]
