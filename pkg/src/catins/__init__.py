"""Agent-based catastrophe insurance market with a learning government.

Households, insurers and a government interact in a simulated market hit by
random catastrophes. The government learns which intervention gives the
best marginal value of public funds in each market state.
"""

from .config import ConfigError, ScenarioConfig, load_scenario, save_scenario, validate, with_overrides
from .env import EpisodeTrace, WorldState, build_world, intervention_phase, market_phase, run_episode
from .government import Intervention
from .metrics import StylizedFactReport, check_stylized_facts, coverage_rate, gini_index
from .rl import CatastropheEnv, MarketStateId, QTable, classify_state, extract_policy, train

__all__ = [
    "CatastropheEnv", "ConfigError", "EpisodeTrace", "Intervention", "MarketStateId", "QTable",
    "ScenarioConfig", "StylizedFactReport", "WorldState", "build_world", "check_stylized_facts",
    "classify_state", "coverage_rate", "extract_policy", "gini_index", "intervention_phase",
    "load_scenario", "market_phase", "run_episode", "save_scenario", "train", "validate",
    "with_overrides",
]
