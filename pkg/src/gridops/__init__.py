"""Sequential power-network operation simulator and benchmark harness."""

__version__ = "0.1.0"

from .actions import DO_NOTHING, Action, LineSet, SubReconfig
from .chronics import (
    MixConfig,
    ScenarioChronics,
    frame_at,
    forecast_at,
    generate_synthetic,
    load_scenario,
    renewable_energy_share,
    save_scenario,
)
from .env import Environment, Observation, StepResult
from .exceptions import (
    ActionError,
    BenchmarkError,
    ChronicsError,
    EnvUsageError,
    GridFormatError,
    GridOpsError,
    PowerFlowError,
)
from .model import (
    GridModel,
    TopologyState,
    count_unitary_topology_actions,
    enumerate_unitary_topology_actions,
    load_grid,
    parse_grid,
    serialize_grid,
    to_bus_branch,
)
from .powerflow import InjectionSet, PowerFlowSolution, SolverConfig, loading, solve_ac, solve_dc
from .rules import EnvState, OpponentConfig, RulesConfig
from .runner import RunProfile, run_benchmark, run_episode
from .scoring import CostConfig, ScoreAnchors, normalize_score

__all__ = [
    "Action",
    "ActionError",
    "BenchmarkError",
    "ChronicsError",
    "CostConfig",
    "DO_NOTHING",
    "EnvState",
    "EnvUsageError",
    "Environment",
    "GridFormatError",
    "GridModel",
    "GridOpsError",
    "InjectionSet",
    "LineSet",
    "MixConfig",
    "Observation",
    "OpponentConfig",
    "PowerFlowError",
    "PowerFlowSolution",
    "RulesConfig",
    "RunProfile",
    "ScenarioChronics",
    "ScoreAnchors",
    "SolverConfig",
    "StepResult",
    "SubReconfig",
    "TopologyState",
    "count_unitary_topology_actions",
    "enumerate_unitary_topology_actions",
    "forecast_at",
    "frame_at",
    "generate_synthetic",
    "load_grid",
    "loading",
    "load_scenario",
    "normalize_score",
    "parse_grid",
    "renewable_energy_share",
    "run_benchmark",
    "run_episode",
    "save_scenario",
    "serialize_grid",
    "solve_ac",
    "solve_dc",
    "to_bus_branch",
]
