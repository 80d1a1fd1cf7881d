"""Shared test utilities: canonical plan driving, scenario text, tree diffs."""

from __future__ import annotations

import dataclasses

from redsim.agents import ScriptedKillchain, rollout
from redsim.engine import Backend, Environment, REFERENCE_SIM
from redsim.scenario import Scenario
from redsim.wrappers import FlatWrapper

EMPTY_SCENARIO_TEXT = """\
name: empty
max_steps: 5
"""

EMPTY_IMAGES_TEXT = """\
images: []
"""


def canonical_env(builtin: Scenario, seed: int = 1, steps: int | None = None,
                  backend: Backend = REFERENCE_SIM):
    """Run the scripted killchain for ``steps`` steps (default: to the end).

    Returns (env, wrapper, log).
    """
    env = Environment(builtin, backend, seed)
    wrapper = FlatWrapper(builtin)
    policy = ScriptedKillchain(wrapper)
    log = rollout(env, wrapper, policy, step_cap=steps)
    return env, wrapper, log


def without_firewall_allows(builtin: Scenario) -> Scenario:
    """Builtin scenario with every cross-subnet allow rule removed."""
    rules = tuple(r for r in builtin.firewall_rules if not r.allow)
    return dataclasses.replace(builtin, firewall_rules=rules)


def tree_diff(a, b, path="") -> list[str]:
    """Paths at which two plain nested structures differ."""
    if type(a) is not type(b):
        return [path or "<root>"]
    if isinstance(a, dict):
        out = []
        for key in sorted(set(a) | set(b)):
            if key not in a or key not in b:
                out.append(f"{path}.{key}")
            else:
                out.extend(tree_diff(a[key], b[key], f"{path}.{key}"))
        return out
    if isinstance(a, list):
        if len(a) != len(b):
            return [path or "<root>"]
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out.extend(tree_diff(x, y, f"{path}[{i}]"))
        return out
    return [] if a == b else [path or "<root>"]
