"""geoseek: geolocation reward engineering and evaluation toolkit."""

from .geo import (
    EARTH_RADIUS_KM,
    MAX_DISTANCE_KM,
    Band,
    GeoPoint,
    classify_band,
    geoscore,
    haversine_distance,
)
from .rewards import (
    AddressHierarchy,
    CandidateResponse,
    RewardBreakdown,
    RewardConfig,
    composite_reward,
    consistency_reward,
    directly_judge_reward,
    length_penalty,
    semantic_reward,
    spatial_reward,
)

__version__ = "0.1.0"

__all__ = [
    "EARTH_RADIUS_KM",
    "MAX_DISTANCE_KM",
    "Band",
    "GeoPoint",
    "classify_band",
    "geoscore",
    "haversine_distance",
    "AddressHierarchy",
    "CandidateResponse",
    "RewardBreakdown",
    "RewardConfig",
    "composite_reward",
    "consistency_reward",
    "directly_judge_reward",
    "length_penalty",
    "semantic_reward",
    "spatial_reward",
    "__version__",
]
