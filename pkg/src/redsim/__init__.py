"""redsim: a desk-scale autonomous cyber-operations gym.

A two-subnet killchain scenario is modelled as a finite state machine; a
red agent is trained against it by tabular reinforcement learning and
evaluated across backends of differing strictness to expose sim-to-real
transfer gaps.
"""

from .actions import Action, ActionOutcome, ActionParams, apply
from .engine import (
    Backend,
    Environment,
    EpisodeLog,
    FLAWED_SIM,
    REFERENCE_SIM,
    StepResult,
    backend_by_name,
    emu_proxy,
    reset,
    run_episode,
    step,
)
from .observation import Observation, build_observation
from .planner import Plan, PlanResult, enumerate_reachable, shortest_plan
from .scenario import (
    Diagnostic,
    Scenario,
    builtin_killchain_scenario,
    parse_scenario,
    serialize_scenario,
    validate,
)
from .world import AgentKnowledge, WorldState, instantiate, reachable, serialize_world
from .wrappers import ActionMask, EncodedAction, FlatWrapper

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionMask",
    "ActionOutcome",
    "ActionParams",
    "AgentKnowledge",
    "Backend",
    "Diagnostic",
    "EncodedAction",
    "Environment",
    "EpisodeLog",
    "FLAWED_SIM",
    "FlatWrapper",
    "Observation",
    "Plan",
    "PlanResult",
    "REFERENCE_SIM",
    "Scenario",
    "StepResult",
    "WorldState",
    "apply",
    "backend_by_name",
    "build_observation",
    "builtin_killchain_scenario",
    "emu_proxy",
    "enumerate_reachable",
    "instantiate",
    "parse_scenario",
    "reachable",
    "reset",
    "run_episode",
    "serialize_scenario",
    "serialize_world",
    "shortest_plan",
    "step",
    "validate",
]
