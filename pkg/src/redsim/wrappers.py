"""Fixed-length numeric observations and integer-vector actions.

The flat vector encodes the agent's cumulative knowledge, not the per-step
delta, which makes the wrapped process Markov for a memoryless learner:

    [success one-hot x3]
    per host (scenario order): [discovered, port-known x len(ports),
                                session-level in {0,1/3,2/3,1}, os-known]
    per subnet (scenario order): [swept, routed]

``ports`` is the sorted set of service ports over all images, so the
layout is fixed by the scenario and identical across seeds and steps.
Addresses themselves (the re-randomized quantity) never enter the vector.

Actions travel as four integer heads [action, session, host, subnet];
heads the chosen action's schema does not use are ignored. The mask keeps
each head to entities the agent has actually encountered.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from . import catalog as cat
from .actions import Action, ActionParams, SUCCESS_FALSE, SUCCESS_TRUE, SUCCESS_UNKNOWN
from .errors import MaskViolationError
from .scenario import Scenario
from .world import AgentKnowledge

SUCCESS_ORDER = (SUCCESS_TRUE, SUCCESS_FALSE, SUCCESS_UNKNOWN)

HEAD_ACTION = 0
HEAD_SESSION = 1
HEAD_HOST = 2
HEAD_SUBNET = 3
HEAD_NAMES = ("action", "session", "host", "subnet")

_PARAM_TO_HEAD = {
    cat.PARAM_SESSION: HEAD_SESSION,
    cat.PARAM_TARGET_IP: HEAD_HOST,
    cat.PARAM_TARGET_SUBNET: HEAD_SUBNET,
}


@dataclass(frozen=True)
class EncodedAction:
    action: int
    session: int = 0
    host: int = 0
    subnet: int = 0

    def head(self, index: int) -> int:
        return (self.action, self.session, self.host, self.subnet)[index]


@dataclass(frozen=True)
class ActionMask:
    """Per-head legality bitmaps for the current knowledge."""

    action: tuple[bool, ...]
    session: tuple[bool, ...]
    host: tuple[bool, ...]
    subnet: tuple[bool, ...]

    def head(self, index: int) -> tuple[bool, ...]:
        return (self.action, self.session, self.host, self.subnet)[index]

    def legal_positions(self, index: int) -> list[int]:
        return [i for i, ok in enumerate(self.head(index)) if ok]


class FlatWrapper:
    """Observation flattener and action codec for one agent of a scenario."""

    def __init__(self, scenario: Scenario, agent: str | None = None):
        self.scenario = scenario
        if agent is None:
            if len(scenario.agents) != 1:
                raise ValueError("agent name required for multi-agent scenarios")
            agent = scenario.agents[0].name
        self.agent = agent
        spec = next(a for a in scenario.agents if a.name == agent)
        self.hosts = scenario.host_ids()
        self.subnets = scenario.subnet_ids()
        self.ports = tuple(
            sorted({svc.port for image in scenario.images.values() for svc in image.services})
        )
        catalog = scenario.action_catalog or dict(cat.DEFAULT_CATALOG_BY_NAME)
        allowed = set(spec.allowed_actions) if spec.allowed_actions else set(catalog)
        allowed.add(cat.SLEEP)  # Sleep is always selectable
        self.actions = tuple(d for d in catalog.values() if d.name in allowed)
        self.session_slots = len(spec.starting_sessions) + 2 * len(self.hosts)
        self._action_index = {d.name: i for i, d in enumerate(self.actions)}
        self._host_index = {h: i for i, h in enumerate(self.hosts)}
        self._subnet_index = {s: i for i, s in enumerate(self.subnets)}

    # ------------------------------------------------------------------
    # Observation side

    def vector_length(self) -> int:
        return 3 + len(self.hosts) * (3 + len(self.ports)) + 2 * len(self.subnets)

    def flatten(self, success: str, knowledge: AgentKnowledge) -> tuple[float, ...]:
        values = [1.0 if success == s else 0.0 for s in SUCCESS_ORDER]
        for host in self.hosts:
            values.append(1.0 if host in knowledge.interfaces else 0.0)
            for port in self.ports:
                values.append(1.0 if (host, port) in knowledge.known_ports else 0.0)
            values.append(knowledge.session_level(host) / 3.0)
            values.append(1.0 if host in knowledge.known_os else 0.0)
        for subnet in self.subnets:
            values.append(1.0 if subnet in knowledge.swept_subnets else 0.0)
            values.append(1.0 if subnet in knowledge.routed_subnets else 0.0)
        return tuple(values)

    def layout(self) -> dict:
        """Slot map for the vector and the action heads, as plain data."""
        slots = [{"index": i, "name": f"success={s}"} for i, s in enumerate(SUCCESS_ORDER)]
        idx = len(slots)
        for host in self.hosts:
            slots.append({"index": idx, "name": f"host[{host}].discovered"})
            idx += 1
            for port in self.ports:
                slots.append({"index": idx, "name": f"host[{host}].port[{port}].known"})
                idx += 1
            slots.append(
                {
                    "index": idx,
                    "name": f"host[{host}].session_level",
                    "levels": {"none": 0.0, "shell": 1 / 3, "meterpreter": 2 / 3, "system": 1.0},
                }
            )
            idx += 1
            slots.append({"index": idx, "name": f"host[{host}].os_known"})
            idx += 1
        for subnet in self.subnets:
            slots.append({"index": idx, "name": f"subnet[{subnet}].swept"})
            idx += 1
            slots.append({"index": idx, "name": f"subnet[{subnet}].routed"})
            idx += 1
        return {
            "scenario": self.scenario.name,
            "agent": self.agent,
            "vector_length": self.vector_length(),
            "slots": slots,
            "action_heads": {
                "order": list(HEAD_NAMES),
                "action": [d.name for d in self.actions],
                "session_slots": self.session_slots,
                "host": list(self.hosts),
                "subnet": list(self.subnets),
            },
            "action_params": {d.name: list(d.params) for d in self.actions},
        }

    def layout_json(self) -> str:
        return json.dumps(self.layout(), sort_keys=True, indent=2)

    # ------------------------------------------------------------------
    # Action side

    def used_heads(self, action_index: int) -> tuple[int, ...]:
        definition = self.actions[action_index]
        return tuple(_PARAM_TO_HEAD[p] for p in definition.params)

    def mask(self, knowledge: AgentKnowledge) -> ActionMask:
        sessions = tuple(i in knowledge.sessions for i in range(self.session_slots))
        known_hosts = knowledge.hosts_known()
        hosts = tuple(h in known_hosts for h in self.hosts)
        subnets = tuple(s in knowledge.known_subnets for s in self.subnets)
        per_head = (None, sessions, hosts, subnets)
        actions = []
        for i in range(len(self.actions)):
            # An action stays selectable only while every head it binds has
            # at least one legal position; Sleep binds none, so always is.
            actions.append(all(any(per_head[h]) for h in self.used_heads(i)))
        return ActionMask(tuple(actions), sessions, hosts, subnets)

    def decode(self, encoded: EncodedAction, knowledge: AgentKnowledge) -> Action:
        mask = self.mask(knowledge)
        self._check_bounds(encoded)
        if not mask.action[encoded.action]:
            raise MaskViolationError(f"action head {encoded.action} is masked")
        used = self.used_heads(encoded.action)
        for head in used:
            if not mask.head(head)[encoded.head(head)]:
                raise MaskViolationError(
                    f"{HEAD_NAMES[head]} head position {encoded.head(head)} is masked"
                )
        definition = self.actions[encoded.action]
        session = encoded.session if HEAD_SESSION in used else None
        target_ip = None
        target_host = None
        if HEAD_HOST in used:
            target_host = self.hosts[encoded.host]
            iface = knowledge.interfaces.get(target_host)
            target_ip = iface[0] if iface else None
        target_subnet = self.subnets[encoded.subnet] if HEAD_SUBNET in used else None
        return Action(
            definition.name,
            ActionParams(
                session=session,
                target_ip=target_ip,
                target_subnet=target_subnet,
                target_host=target_host,
            ),
        )

    def encode(self, action: Action, knowledge: AgentKnowledge) -> EncodedAction:
        if action.name not in self._action_index:
            raise ValueError(f"action {action.name!r} not in this agent's head layout")
        index = self._action_index[action.name]
        used = self.used_heads(index)
        heads = [index, 0, 0, 0]
        if HEAD_SESSION in used and action.params.session is not None:
            heads[HEAD_SESSION] = action.params.session
        if HEAD_HOST in used:
            host = action.params.target_host
            if host is None and action.params.target_ip is not None:
                for candidate, (ip, _subnet) in knowledge.interfaces.items():
                    if ip == action.params.target_ip:
                        host = candidate
                        break
            if host is not None:
                heads[HEAD_HOST] = self._host_index[host]
        if HEAD_SUBNET in used and action.params.target_subnet is not None:
            heads[HEAD_SUBNET] = self._subnet_index[action.params.target_subnet]
        return EncodedAction(*heads)

    def enumerate_legal(self, mask: ActionMask) -> list[EncodedAction]:
        """All mask-legal encodings, unused heads pinned to zero."""
        out = []
        for action_index in range(len(self.actions)):
            if not mask.action[action_index]:
                continue
            used = self.used_heads(action_index)
            choices = []
            for head in (HEAD_SESSION, HEAD_HOST, HEAD_SUBNET):
                choices.append(mask.legal_positions(head) if head in used else [0])
            for session, host, subnet in itertools.product(*choices):
                out.append(EncodedAction(action_index, session, host, subnet))
        return out

    def _check_bounds(self, encoded: EncodedAction) -> None:
        limits = (
            len(self.actions),
            self.session_slots,
            max(len(self.hosts), 1),
            max(len(self.subnets), 1),
        )
        for head, limit in enumerate(limits):
            if not 0 <= encoded.head(head) < limit:
                raise MaskViolationError(
                    f"{HEAD_NAMES[head]} head value {encoded.head(head)} outside 0..{limit - 1}"
                )
