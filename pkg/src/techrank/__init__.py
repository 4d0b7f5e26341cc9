"""TechRank: degree-damped random walks ranking companies and technologies."""
from .calibration import CalibrationResult, GridSpec, Target, calibrate
from .estimator import TechRank, TechRankSearch
from .exceptions import TechRankError
from .factors import (
    FeatureVector,
    GeoPoint,
    PreferenceProfile,
    compose_ground_truth,
    haversine,
    investment_factor_companies,
    investment_factor_technologies,
    location_factor,
)
from .graph import BipartiteGraph, EntityRegistry, InvestmentGraph, build_bipartite, degrees
from .stats import normalize_minmax, spearman
from .walker import TransitionMatrices, WalkerParams, WalkerState, init_weights, run, step, transition_matrices

__version__ = "0.1.0"

__all__ = [
    "BipartiteGraph", "EntityRegistry", "InvestmentGraph", "build_bipartite", "degrees",
    "WalkerParams", "WalkerState", "TransitionMatrices", "init_weights", "transition_matrices", "step", "run",
    "GridSpec", "CalibrationResult", "Target", "calibrate", "spearman", "normalize_minmax",
    "FeatureVector", "GeoPoint", "PreferenceProfile", "compose_ground_truth", "haversine",
    "investment_factor_companies", "investment_factor_technologies", "location_factor",
    "TechRank", "TechRankSearch", "TechRankError",
]
