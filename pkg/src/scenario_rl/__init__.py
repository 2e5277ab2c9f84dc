"""Scenario-consistent rollouts for portfolio rebalancing with PPO."""

from .agent import Agent, ConfigError, TrainConfig, TrainingError, train
from .env import ConstraintSet, EnvParams, PortfolioEnv, project_box_simplex
from .metrics import MetricsReport
from .scr import SCRParams, ScenarioContext
from .tape import ReturnTape, SplitSpec, SyntheticTapeConfig, TapeError, generate_synthetic_tape, load_tape

__version__ = "0.1.0"

__all__ = [
    "Agent", "ConfigError", "ConstraintSet", "EnvParams", "MetricsReport", "PortfolioEnv",
    "ReturnTape", "SCRParams", "ScenarioContext", "SplitSpec", "SyntheticTapeConfig",
    "TapeError", "TrainConfig", "TrainingError", "generate_synthetic_tape", "load_tape",
    "project_box_simplex", "train",
]
