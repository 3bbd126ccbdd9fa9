"""Robustness of values in stochastic parity and multi-discounted games."""

__version__ = "0.1.0"

from .game_core import (
    DiscountSpec,
    GameStructure,
    MarkovChain,
    MemorylessStrategy,
    ParityObjective,
    StructureKind,
    absolute_distance,
    classify,
    distance_report,
    ratio_distance,
    structurally_equivalent,
)
from .robustness import beta_threshold, perturb, perturbation_bound

__all__ = [
    "DiscountSpec",
    "GameStructure",
    "MarkovChain",
    "MemorylessStrategy",
    "ParityObjective",
    "StructureKind",
    "absolute_distance",
    "classify",
    "distance_report",
    "ratio_distance",
    "structurally_equivalent",
    "beta_threshold",
    "perturb",
    "perturbation_bound",
]
