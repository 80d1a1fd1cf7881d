"""Policies: scripted killchain oracle, uniform random, factored Q-learner.

All policies speak the wrapper protocol: ``act(flat, mask)`` returns a
mask-legal EncodedAction. The Q-learner keeps one value table per head
(action, session, host, subnet), keyed by the exact flattened observation;
parameter heads are updated only when the taken action's schema uses them,
all heads share the step reward.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .engine import Environment, EpisodeLog, StepRecord
from .errors import MaskViolationError
from .scenario import Scenario
from .wrappers import (
    ActionMask,
    EncodedAction,
    FlatWrapper,
    HEAD_ACTION,
    HEAD_HOST,
    HEAD_SESSION,
    HEAD_SUBNET,
)


class ScriptedKillchain:
    """Deterministic oracle for the built-in scenario shape.

    Emits the canonical seven-step chain (sweep, scan, bruteforce, upgrade,
    route, rescan, exploit) and retries a step while the previous attempt
    reports failure; after the chain it sleeps.
    """

    def __init__(self, wrapper: FlatWrapper):
        self.wrapper = wrapper
        scenario = wrapper.scenario
        if scenario.goal is None:
            raise ValueError("scripted killchain needs a scenario with a goal")
        goal_host = scenario.goal.host
        goal_subnet = next(h.subnet_id for h in scenario.hosts if h.id == goal_host)
        gateway = next(
            h.id for h in scenario.hosts if h.subnet_id == goal_subnet and h.id != goal_host
        )
        act_idx = {d.name: i for i, d in enumerate(wrapper.actions)}
        host_idx = {h: i for i, h in enumerate(wrapper.hosts)}
        subnet_idx = {s: i for i, s in enumerate(wrapper.subnets)}
        sweep = subnet_idx[goal_subnet]
        self.sequence = (
            EncodedAction(act_idx["Pingsweep"], session=0, subnet=sweep),
            EncodedAction(act_idx["Portscan"], session=0, host=host_idx[gateway]),
            EncodedAction(act_idx["SSHBruteforce"], session=0, host=host_idx[gateway]),
            EncodedAction(act_idx["UpgradeToMeterpreter"], session=1),
            EncodedAction(act_idx["Autoroute"], session=1, subnet=sweep),
            EncodedAction(act_idx["Portscan"], session=0, host=host_idx[goal_host]),
            EncodedAction(act_idx["MS17-010-PSExec"], session=0, host=host_idx[goal_host]),
        )
        self._sleep = EncodedAction(act_idx["Sleep"])
        self._index = 0

    def begin_episode(self, seed: int | None = None) -> None:
        self._index = 0

    def act(self, flat: tuple, mask: ActionMask) -> EncodedAction:
        failed = flat[1] == 1.0  # success one-hot: [True, False, Unknown]
        if not failed and flat[2] != 1.0 and self._index < len(self.sequence):
            self._index += 1  # previous step landed, move on
        if self._index >= len(self.sequence):
            return self._sleep
        return self.sequence[self._index]


class RandomPolicy:
    """Uniform choice over the mask-legal encoded actions."""

    def __init__(self, wrapper: FlatWrapper, seed: int = 0):
        self.wrapper = wrapper
        self.rng = random.Random(seed)

    def begin_episode(self, seed: int | None = None) -> None:
        if seed is not None:
            self.rng = random.Random(seed)

    def act(self, flat: tuple, mask: ActionMask) -> EncodedAction:
        legal = self.wrapper.enumerate_legal(mask)
        return self.rng.choice(legal)


@dataclass
class TrainConfig:
    max_iterations: int = 2500
    step_cap: int = 20
    success_bar: int = 10
    seed: int = 0
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.999
    epsilon_floor: float = 0.05
    # Unvisited entries start at the goal-reward scale (resolved from the
    # scenario when None). Zero initialization leaves greedy stuck on the
    # first reward-farming path it beats into the table; optimism makes it
    # re-evaluate undervisited alternatives until the short chain wins.
    optimism: float | None = None


@dataclass
class TrainReport:
    iterations_used: int
    success: bool
    returns: list[float] = field(default_factory=list)
    final_goal_step: int | None = None


class FactoredQPolicy:
    """Tabular Q-learning over branched action/parameter heads."""

    def __init__(self, head_sizes, used_heads, alpha=0.1, gamma=0.9,
                 epsilon=0.0, optimism: float = 0.0, seed: int = 0):
        self.head_sizes = list(head_sizes)
        self.used_heads = used_heads  # callable: action index -> head indices
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.optimism = optimism
        self.training = False
        self.rng = random.Random(seed)
        self.table: dict[tuple, list[list[float]]] = {}

    @classmethod
    def for_wrapper(cls, wrapper: FlatWrapper, config: TrainConfig,
                    optimism: float = 0.0) -> "FactoredQPolicy":
        sizes = (
            len(wrapper.actions),
            wrapper.session_slots,
            max(len(wrapper.hosts), 1),
            max(len(wrapper.subnets), 1),
        )
        return cls(
            sizes,
            wrapper.used_heads,
            alpha=config.alpha,
            gamma=config.gamma,
            epsilon=config.epsilon_start,
            optimism=optimism,
            seed=config.seed,
        )

    def begin_episode(self, seed: int | None = None) -> None:
        pass  # exploration uses one continuous stream; greedy needs no RNG

    def _row(self, key: tuple, head: int) -> list[float]:
        entry = self.table.get(key)
        if entry is None:
            return [self.optimism] * self.head_sizes[head]
        return entry[head]

    def _row_for_update(self, key: tuple, head: int) -> list[float]:
        entry = self.table.get(key)
        if entry is None:
            entry = [[self.optimism] * size for size in self.head_sizes]
            self.table[key] = entry
        return entry[head]

    @staticmethod
    def _argmax(row, legal) -> int:
        best = legal[0]
        for position in legal[1:]:
            if row[position] > row[best]:
                best = position  # ties keep the lowest index
        return best

    def _greedy(self, key: tuple, mask: ActionMask) -> EncodedAction:
        action = self._argmax(self._row(key, HEAD_ACTION), mask.legal_positions(HEAD_ACTION))
        heads = [action, 0, 0, 0]
        for head in self.used_heads(action):
            heads[head] = self._argmax(self._row(key, head), mask.legal_positions(head))
        return EncodedAction(*heads)

    def act(self, flat: tuple, mask: ActionMask) -> EncodedAction:
        if self.training and self.rng.random() < self.epsilon:
            action = self.rng.choice(mask.legal_positions(HEAD_ACTION))
            heads = [action, 0, 0, 0]
            for head in self.used_heads(action):
                heads[head] = self.rng.choice(mask.legal_positions(head))
            return EncodedAction(*heads)
        return self._greedy(flat, mask)

    def learn(self, flat: tuple, encoded: EncodedAction, reward: float,
              next_flat: tuple, next_mask: ActionMask, done: bool) -> None:
        for head in (HEAD_ACTION, *self.used_heads(encoded.action)):
            if done:
                target = reward
            else:
                next_row = self._row(next_flat, head)
                legal = next_mask.legal_positions(head)
                target = reward + self.gamma * (
                    max(next_row[p] for p in legal) if legal else 0.0
                )
            row = self._row_for_update(flat, head)
            choice = encoded.head(head)
            row[choice] += self.alpha * (target - row[choice])


def rollout(env: Environment, wrapper: FlatWrapper, policy, step_cap: int | None = None,
            learn: bool = False) -> EpisodeLog:
    """Drive one episode through the wrapper; asserts mask compliance."""
    agent = wrapper.agent
    knowledge = env.knowledge(agent)
    success = env.initial_observation(agent).success
    flat = wrapper.flatten(success, knowledge)
    mask = wrapper.mask(knowledge)
    log = EpisodeLog(seed=env.seed, backend=env.backend.name)
    cap = env.scenario.max_steps if step_cap is None else min(step_cap, env.scenario.max_steps)
    while not env.done and len(log.steps) < cap:
        encoded = policy.act(flat, mask)
        action = wrapper.decode(encoded, knowledge)  # raises MaskViolationError on bad policies
        result = env.step(action)
        next_flat = wrapper.flatten(result.observation.success, knowledge)
        next_mask = wrapper.mask(knowledge)
        if learn:
            policy.learn(flat, encoded, result.reward, next_flat, next_mask, result.done)
        log.steps.append(StepRecord(action, result.observation.success, result.reward))
        log.total_reward += result.reward
        if result.info["goal_reached"] and log.goal_step is None:
            log.goal_step = result.info["step"]
        flat, mask = next_flat, next_mask
    return log


def scripted_killchain(scenario: Scenario) -> tuple[FlatWrapper, ScriptedKillchain]:
    wrapper = FlatWrapper(scenario)
    return wrapper, ScriptedKillchain(wrapper)


def _episode_seeds(seed: int):
    return random.Random(seed ^ 0x5DEECE66D)


def train_q(env_factory, config: TrainConfig) -> tuple[FactoredQPolicy, TrainReport]:
    """Train one agent; stops once the greedy policy beats the success bar.

    ``env_factory(seed)`` must return a fresh Environment on the training
    backend. Fully deterministic for equal (factory, config).
    """
    seed_stream = _episode_seeds(config.seed)
    probe = env_factory(0)
    wrapper = FlatWrapper(probe.scenario)
    optimism = config.optimism
    if optimism is None:
        optimism = probe.scenario.rewards.goal_reward
    policy = FactoredQPolicy.for_wrapper(wrapper, config, optimism=optimism)
    report = TrainReport(iterations_used=0, success=False)
    for iteration in range(config.max_iterations):
        train_seed = seed_stream.randrange(2**62)
        eval_seed = seed_stream.randrange(2**62)
        env = env_factory(train_seed)
        policy.training = True
        log = rollout(env, wrapper, policy, step_cap=config.step_cap, learn=True)
        report.returns.append(log.total_reward)
        policy.epsilon = max(config.epsilon_floor, policy.epsilon * config.epsilon_decay)
        report.iterations_used = iteration + 1

        policy.training = False
        greedy_env = env_factory(eval_seed)
        greedy = rollout(greedy_env, wrapper, policy, step_cap=config.step_cap)
        report.final_goal_step = greedy.goal_step
        if greedy.goal_step is not None and greedy.goal_step <= config.success_bar:
            report.success = True
            break
    policy.training = False
    return policy, report


@dataclass
class EvalResult:
    successes: int
    goal_steps: list[int | None] = field(default_factory=list)
    logs: list[EpisodeLog] = field(default_factory=list)


def evaluate(policy, env_factory, episodes: int, base_seed: int = 0,
             step_cap: int | None = None, wrapper: FlatWrapper | None = None) -> EvalResult:
    """Run greedy episodes on fresh seeds; success = goal within the cap."""
    result = EvalResult(successes=0)
    for i in range(episodes):
        seed = base_seed + i
        env = env_factory(seed)
        if wrapper is None:
            wrapper = FlatWrapper(env.scenario)
        policy.begin_episode(seed)
        log = rollout(env, wrapper, policy, step_cap=step_cap)
        result.goal_steps.append(log.goal_step)
        result.logs.append(log)
        if log.goal_step is not None:
            result.successes += 1
    return result


# ---------------------------------------------------------------------------
# Policy persistence

POLICY_FORMAT_VERSION = 1


def policy_doc(policy: FactoredQPolicy) -> dict:
    """JSON-serializable form of a trained policy (versioned, key-sorted)."""
    entries = [
        {"key": list(key), "heads": heads}
        for key, heads in sorted(policy.table.items())
    ]
    return {
        "version": POLICY_FORMAT_VERSION,
        "alpha": policy.alpha,
        "gamma": policy.gamma,
        "optimism": policy.optimism,
        "head_sizes": policy.head_sizes,
        "entries": entries,
    }


def policy_from_doc(doc: dict, wrapper: FlatWrapper) -> FactoredQPolicy:
    if doc.get("version") != POLICY_FORMAT_VERSION:
        raise ValueError(f"unsupported policy file version {doc.get('version')!r}")
    policy = FactoredQPolicy(
        doc["head_sizes"],
        wrapper.used_heads,
        alpha=doc["alpha"],
        gamma=doc["gamma"],
        optimism=doc.get("optimism", 0.0),
    )
    for entry in doc["entries"]:
        policy.table[tuple(entry["key"])] = entry["heads"]
    return policy


def save_policy(policy: FactoredQPolicy, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(policy_doc(policy), handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_policy(path, wrapper: FlatWrapper) -> FactoredQPolicy:
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    return policy_from_doc(doc, wrapper)
