"""Decision-support engine for utility TBM operators.

Learns the mapping from control and context parameters to an optimality
score, recommends control adjustments via input gradients, and annotates
each recommendation with a nearest-neighbor credibility score.
"""

from .domain import (
    CredibilityCalibration,
    FeatureScaler,
    GroundClass,
    MlpModel,
    OptimalityConfig,
    Recommendation,
    SensorRecord,
    ValidationCell,
    ValidationReport,
    validate_record,
)
from .mlp import FeedForwardRegressor, TrainConfig
from .neighbors import NeighborIndex, build_index, gaussian_weight
from .optimality import fit_config, normalize, raw_score

__version__ = "0.1.0"

__all__ = [
    "CredibilityCalibration",
    "FeatureScaler",
    "FeedForwardRegressor",
    "GroundClass",
    "MlpModel",
    "NeighborIndex",
    "OptimalityConfig",
    "Recommendation",
    "SensorRecord",
    "TrainConfig",
    "ValidationCell",
    "ValidationReport",
    "build_index",
    "fit_config",
    "gaussian_weight",
    "normalize",
    "raw_score",
    "validate_record",
]
