"""Statistical-CSI design of STARS-assisted full-duplex two-way massive MIMO."""

from .config import ConfigError, SystemConfig, desk_config, load_config, place_users
from .correlation import CorrelationSet, build_correlations
from .estimation import EstimationStats, estimation_stats
from .pbm import PBM, project, random_pbm
from .spectral_efficiency import SEReport, make_variant, sum_se

__all__ = [
    "ConfigError", "SystemConfig", "desk_config", "load_config", "place_users",
    "CorrelationSet", "build_correlations", "EstimationStats", "estimation_stats",
    "PBM", "project", "random_pbm", "SEReport", "make_variant", "sum_se",
]

__version__ = "0.1.0"
