"""Aerial mmWave access market: initial-stage games, migration dynamics and an agent-based check."""

from .channel import CrowdParams, DeploymentParams, Fleet, LinkState, RadioParams
from .config import ConfigError, ScenarioConfig, load_config
from .dynamics import BehaviorFactors, MarketState, QCoefficients, Trajectory
from .equilibrium import EconParams, EquilibriumResult, Game
from .quality import QualityParams, TariffFit
from .scenario import build_scenario

__all__ = [
    "BehaviorFactors", "ConfigError", "CrowdParams", "DeploymentParams", "EconParams",
    "EquilibriumResult", "Fleet", "Game", "LinkState", "MarketState", "QCoefficients",
    "QualityParams", "RadioParams", "ScenarioConfig", "TariffFit", "Trajectory",
    "build_scenario", "load_config",
]
