"""Discrete-step episode loop over a pluggable backend.

Backends share the same transition code and differ only in two knobs:
per-action stochastic failure probability and whether the MS17-010-PSExec
network gates are disabled (the flawed-simulator artefact). An environment
handle owns one world and one RNG; any number of handles can run in
parallel, sharing only the immutable Scenario.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .actions import Action, ActionOutcome, SUCCESS_UNKNOWN, apply
from .errors import StepAfterDoneError
from .observation import Observation, build_observation
from .scenario import PRIV_USER, Scenario, validate
from .world import AgentKnowledge, WorldState, instantiate

BACKEND_SIM = "sim"
BACKEND_FLAWED_SIM = "flawed-sim"
BACKEND_EMU_PROXY = "emu-proxy"

DEFAULT_EMU_FAILURE_PROB = 0.05


@dataclass(frozen=True)
class Backend:
    """One transition semantics: strictness and failure injection."""

    name: str
    failure_prob: float = 0.0
    flawed_routing: bool = False


REFERENCE_SIM = Backend(BACKEND_SIM)
FLAWED_SIM = Backend(BACKEND_FLAWED_SIM, flawed_routing=True)


def emu_proxy(failure_prob: float = DEFAULT_EMU_FAILURE_PROB) -> Backend:
    return Backend(BACKEND_EMU_PROXY, failure_prob=failure_prob)


def backend_by_name(name: str, failure_prob: float | None = None) -> Backend:
    if name == BACKEND_SIM:
        return REFERENCE_SIM
    if name == BACKEND_FLAWED_SIM:
        return FLAWED_SIM
    if name == BACKEND_EMU_PROXY:
        return emu_proxy(DEFAULT_EMU_FAILURE_PROB if failure_prob is None else failure_prob)
    raise ValueError(f"unknown backend {name!r}")


@dataclass
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: dict


@dataclass
class StepRecord:
    action: Action
    success: str
    reward: float


@dataclass
class EpisodeLog:
    seed: int
    backend: str
    steps: list[StepRecord] = field(default_factory=list)
    total_reward: float = 0.0
    goal_step: int | None = None

    def to_tree(self) -> dict:
        return {
            "seed": self.seed,
            "backend": self.backend,
            "steps": [
                {"action": rec.action.to_tree(), "success": rec.success, "reward": rec.reward}
                for rec in self.steps
            ],
            "total_reward": self.total_reward,
            "goal_step": self.goal_step,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_tree(), sort_keys=True, separators=(",", ":"))


class Environment:
    """Single-caller handle over one running scenario instance."""

    def __init__(self, scenario: Scenario, backend: Backend, seed: int):
        diagnostics = validate(scenario)
        if diagnostics:
            raise ValueError(f"scenario does not validate: {diagnostics[0]}")
        self.scenario = scenario
        self.backend = backend
        self.seed = seed
        self.world: WorldState = None  # set by reset
        self._knowledge: dict[str, AgentKnowledge] = {}
        self.reset(seed)

    def reset(self, seed: int | None = None) -> dict[str, Observation]:
        """Start a fresh episode; same seed reproduces the same world."""
        if seed is not None:
            self.seed = seed
        self.world, self._knowledge = instantiate(self.scenario, self.seed)
        self._rng = random.Random((self.seed * 0x9E3779B1 + 0x7F4A7C15) & 0xFFFFFFFFFFFFFFFF)
        self.done = False
        self.goal_reached = False
        self._goal_rewarded = False
        self._user_rewarded_hosts: dict[str, set[str]] = {a: set() for a in self._knowledge}
        return {
            agent: build_observation(SUCCESS_UNKNOWN, knowledge)
            for agent, knowledge in self._knowledge.items()
        }

    def knowledge(self, agent: str) -> AgentKnowledge:
        return self._knowledge[agent]

    def agent_names(self) -> list[str]:
        return sorted(self._knowledge)

    def initial_observation(self, agent: str) -> Observation:
        return build_observation(SUCCESS_UNKNOWN, self._knowledge[agent])

    def _goal_holds(self, agent: str) -> bool:
        goal = self.scenario.goal
        if goal is None:
            return False
        return any(
            s.agent == agent and s.host == goal.host and s.privilege == goal.privilege
            for s in self.world.sessions.values()
        )

    def _reward_for(self, agent: str, outcome: ActionOutcome, new_fact_count: int,
                    prior_session_hosts: set[str]) -> float:
        rewards = self.scenario.rewards
        reward = rewards.discovery_reward * new_fact_count
        for sid in outcome.state_delta.get("new_sessions", ()):
            session = self.world.sessions[sid]
            if session.privilege == PRIV_USER and session.host not in prior_session_hosts \
                    and session.host not in self._user_rewarded_hosts[agent]:
                reward += rewards.user_session_reward
                self._user_rewarded_hosts[agent].add(session.host)
        if not self._goal_rewarded and self._goal_holds(agent):
            reward += rewards.goal_reward
            self._goal_rewarded = True
            self.goal_reached = True
        return reward

    def step_all(self, actions: dict[str, Action]) -> dict[str, StepResult]:
        """Advance one step with one action per agent (sorted agent order)."""
        if self.done:
            raise StepAfterDoneError("episode is already done; call reset()")
        results: dict[str, StepResult] = {}
        for agent in sorted(actions):
            knowledge = self._knowledge[agent]
            prior_hosts = {s.host for s in self.world.agent_sessions(agent)}
            outcome = apply(
                actions[agent],
                self.world,
                knowledge,
                self._rng,
                failure_prob=self.backend.failure_prob,
                flawed_routing=self.backend.flawed_routing,
            )
            new_count = knowledge.apply(outcome.new_facts)
            reward = self._reward_for(agent, outcome, new_count, prior_hosts)
            results[agent] = StepResult(
                observation=build_observation(outcome.success, knowledge),
                reward=reward,
                done=False,
                info={},
            )
        self.world.step += 1
        self.done = self.goal_reached or self.world.step >= self.scenario.max_steps
        for agent, result in results.items():
            result.done = self.done
            result.info = {
                "step": self.world.step,
                "goal_reached": self.goal_reached,
                "backend": self.backend.name,
            }
        return results

    def step(self, action: Action) -> StepResult:
        """Single-agent convenience; the scenario must have exactly one agent."""
        agents = self.agent_names()
        if len(agents) != 1:
            raise ValueError("step() requires exactly one agent; use step_all()")
        return self.step_all({agents[0]: action})[agents[0]]


def reset(scenario: Scenario, backend: Backend, seed: int) -> tuple[Environment, Observation]:
    """Build an environment and return it with the first agent's initial view."""
    env = Environment(scenario, backend, seed)
    agents = env.agent_names()
    obs = env.initial_observation(agents[0]) if agents else Observation(SUCCESS_UNKNOWN)
    return env, obs


def step(env: Environment, action: Action) -> StepResult:
    return env.step(action)


def run_episode(env: Environment, select_action, step_cap: int | None = None) -> EpisodeLog:
    """Roll one episode with ``select_action(observation) -> Action``."""
    agent = env.agent_names()[0]
    observation = env.initial_observation(agent)
    log = EpisodeLog(seed=env.seed, backend=env.backend.name)
    cap = env.scenario.max_steps if step_cap is None else min(step_cap, env.scenario.max_steps)
    while not env.done and len(log.steps) < cap:
        action = select_action(observation)
        result = env.step(action)
        observation = result.observation
        log.steps.append(StepRecord(action, result.observation.success, result.reward))
        log.total_reward += result.reward
        if result.info["goal_reached"] and log.goal_step is None:
            log.goal_step = result.info["step"]
    return log
