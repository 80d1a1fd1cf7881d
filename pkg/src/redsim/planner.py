"""Brute-force breadth-first search for the shortest goal-reaching plan.

The search expands every mask-legal action at every state, so it doubles
as an exhaustive enumerator of the knowledge states reachable within a
depth bound (the wrapper round-trip tests use that). Search states are
deduplicated by the agent-visible projection (knowledge atoms + sessions +
routes); the world only changes through the agent, so the projection is a
sound state key. A ``full`` mode keys on the serialized world instead, for
cross-checking that claim.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .actions import Action, SUCCESS_TRUE, apply
from .engine import Backend
from .scenario import Scenario, validate
from .world import AgentKnowledge, WorldState, instantiate, serialize_world
from .wrappers import FlatWrapper

DEFAULT_NODE_BUDGET = 10**6


@dataclass
class Plan:
    actions: list[Action]

    @property
    def length(self) -> int:
        return len(self.actions)

    def to_tree(self) -> dict:
        return {"length": self.length, "actions": [a.to_tree() for a in self.actions]}


@dataclass
class PlanResult:
    plan: Plan | None
    nodes_expanded: int
    budget_exhausted: bool = False


@dataclass
class ReachedState:
    world: WorldState
    knowledge: AgentKnowledge
    depth: int
    path: tuple[Action, ...] = field(default=())


def _projection_key(world: WorldState, knowledge: AgentKnowledge):
    sessions = tuple(
        (s.id, s.host, s.username, s.kind, s.privilege) for _sid, s in sorted(world.sessions.items())
    )
    routes = tuple(sorted((r.via_session, r.target_subnet) for r in world.routes))
    return (frozenset(knowledge.atoms), sessions, routes)


def _full_key(world: WorldState, knowledge: AgentKnowledge):
    return (serialize_world(world), frozenset(knowledge.atoms))


def _goal_holds(world: WorldState, agent: str) -> bool:
    goal = world.scenario.goal
    if goal is None:
        return False
    return any(
        s.agent == agent and s.host == goal.host and s.privilege == goal.privilege
        for s in world.sessions.values()
    )


def _distinct_actions(wrapper: FlatWrapper, knowledge: AgentKnowledge) -> list[Action]:
    mask = wrapper.mask(knowledge)
    seen = set()
    actions = []
    for encoded in wrapper.enumerate_legal(mask):
        action = wrapper.decode(encoded, knowledge)
        if action not in seen:
            seen.add(action)
            actions.append(action)
    return actions


def _search(
    scenario: Scenario,
    backend: Backend,
    seed: int,
    max_depth: int | None,
    node_budget: int,
    dedup: str,
    collect_states: bool,
    stop_at_goal: bool = True,
):
    if backend.failure_prob != 0.0:
        raise ValueError("planning requires a deterministic backend (failure_prob 0)")
    diagnostics = validate(scenario)
    if diagnostics:
        raise ValueError(f"scenario does not validate: {diagnostics[0]}")
    if not scenario.agents:
        return PlanResult(None, 0), []
    key_fn = _projection_key if dedup == "projection" else _full_key
    depth_cap = scenario.max_steps if max_depth is None else min(max_depth, scenario.max_steps)

    world, knowledge_map = instantiate(scenario, seed)
    agent = scenario.agents[0].name
    knowledge = knowledge_map[agent]
    wrapper = FlatWrapper(scenario, agent)
    rng = random.Random(0)  # consumed by the (always-passing) failure gate

    root = ReachedState(world, knowledge, 0)
    if _goal_holds(world, agent):
        return PlanResult(Plan([]), 0), [root]

    seen = {key_fn(world, knowledge)}
    queue = deque([root])
    states = [root]
    expanded = 0
    while queue:
        node = queue.popleft()
        if node.depth >= depth_cap:
            continue
        expanded += 1
        if expanded > node_budget:
            return PlanResult(None, expanded, budget_exhausted=True), states
        for action in _distinct_actions(wrapper, node.knowledge):
            world2 = node.world.clone()
            knowledge2 = node.knowledge.clone()
            outcome = apply(
                action,
                world2,
                knowledge2,
                rng,
                failure_prob=0.0,
                flawed_routing=backend.flawed_routing,
            )
            if outcome.success != SUCCESS_TRUE:
                continue  # failures are exact no-ops: same state, already seen
            knowledge2.apply(outcome.new_facts)
            path = node.path + (action,)
            goal = _goal_holds(world2, agent)
            if goal and stop_at_goal:
                return PlanResult(Plan(list(path)), expanded), states
            key = key_fn(world2, knowledge2)
            if key in seen:
                continue
            seen.add(key)
            child = ReachedState(world2, knowledge2, node.depth + 1, path)
            if not goal:
                queue.append(child)  # goal states are terminal
            if collect_states:
                states.append(child)
    return PlanResult(None, expanded), states


def shortest_plan(
    scenario: Scenario,
    backend: Backend,
    seed: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
    dedup: str = "projection",
) -> PlanResult:
    """Minimum-length plan reaching the goal, or None within max_steps."""
    result, _states = _search(
        scenario, backend, seed, None, node_budget, dedup, collect_states=False
    )
    return result


def enumerate_reachable(
    scenario: Scenario,
    backend: Backend,
    seed: int,
    max_depth: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> list[ReachedState]:
    """Distinct agent-visible states reachable within ``max_depth`` steps.

    Goal states are recorded but not expanded (the episode ends there).
    """
    _result, states = _search(
        scenario,
        backend,
        seed,
        max_depth,
        node_budget,
        "projection",
        collect_states=True,
        stop_at_goal=False,
    )
    return states
