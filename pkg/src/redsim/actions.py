"""Action semantics: preconditions and effects over (world, knowledge).

Every application is gated by a Bernoulli(1 - failure_prob) draw (the draw
is always consumed so RNG streams stay aligned across backends). An unmet
precondition or a failed draw yields success=False and leaves the world
untouched; effects are only committed after every check passed.

``flawed_routing`` reproduces the buggy-simulator behaviour: the
MS17-010-PSExec network gates (observed port 445 and TCP/445 reachability)
are skipped, so the exploit fires straight across the firewall. No other
action differs between the strict and flawed modes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import catalog as cat
from .catalog import ActionDef
from .errors import MalformedActionError
from .scenario import PRIV_SYSTEM, PRIV_USER, PROTO_ICMP, PROTO_TCP
from .world import (
    AgentKnowledge,
    KIND_METERPRETER,
    KIND_SHELL,
    Route,
    Session,
    WorldState,
    firewall_allows,
    reachable,
    session_facts,
)

SUCCESS_TRUE = "True"
SUCCESS_FALSE = "False"
SUCCESS_UNKNOWN = "Unknown"

SSH_PORT = 22
SMB_PORT = 445
ETERNAL_BLUE = "MS17-010"


@dataclass(frozen=True)
class ActionParams:
    session: int | None = None
    target_ip: str | None = None
    target_subnet: str | None = None
    # Host id the wrapper resolved target_ip from; carried so encodings
    # round-trip even before the target's address is known. The simulator
    # itself resolves targets by ip only.
    target_host: str | None = None


@dataclass(frozen=True)
class Action:
    name: str
    params: ActionParams = field(default_factory=ActionParams)

    def to_tree(self) -> dict:
        tree: dict = {"name": self.name}
        params = {}
        if self.params.session is not None:
            params["session"] = self.params.session
        if self.params.target_ip is not None:
            params["target_ip"] = self.params.target_ip
        if self.params.target_subnet is not None:
            params["target_subnet"] = self.params.target_subnet
        if self.params.target_host is not None:
            params["target_host"] = self.params.target_host
        tree["params"] = params
        return tree


@dataclass
class ActionOutcome:
    success: str
    state_delta: dict = field(default_factory=dict)
    new_facts: tuple = ()


def sleep_action() -> Action:
    return Action(cat.SLEEP)


def _check_schema(action: Action, defs: dict[str, ActionDef]) -> ActionDef:
    definition = defs.get(action.name)
    if definition is None:
        raise MalformedActionError(f"unknown action {action.name!r}")
    params = action.params
    has = {
        cat.PARAM_SESSION: params.session is not None,
        cat.PARAM_TARGET_IP: params.target_ip is not None or params.target_host is not None,
        cat.PARAM_TARGET_SUBNET: params.target_subnet is not None,
    }
    for name in definition.params:
        if not has[name]:
            raise MalformedActionError(f"{action.name} is missing parameter {name!r}")
    for name, present in has.items():
        if present and name not in definition.params:
            raise MalformedActionError(f"{action.name} does not take parameter {name!r}")
    return definition


def _fail() -> ActionOutcome:
    return ActionOutcome(SUCCESS_FALSE)


def _owned_session(world: WorldState, knowledge: AgentKnowledge, sid: int | None) -> Session | None:
    if sid is None:
        return None
    session = world.sessions.get(sid)
    if session is None or session.agent != knowledge.agent:
        return None
    return session


def _subnet_boundary_reachable(
    world: WorldState,
    knowledge: AgentKnowledge,
    from_host: str,
    subnet_id: str,
    protocol: str,
    port: int | None,
) -> bool:
    src_subnet = world.hosts[from_host].interface().subnet_id
    if src_subnet == subnet_id:
        return True
    if firewall_allows(world.scenario, src_subnet, subnet_id, protocol, port):
        return True
    for route in world.routes:
        if route.target_subnet != subnet_id:
            continue
        via = world.sessions.get(route.via_session)
        if via is not None and via.agent == knowledge.agent:
            return True
    return False


def apply(
    action: Action,
    world: WorldState,
    knowledge: AgentKnowledge,
    rng: random.Random,
    failure_prob: float = 0.0,
    flawed_routing: bool = False,
) -> ActionOutcome:
    """Run one action against the world; never mutates on failure."""
    defs = world.scenario.action_catalog or cat.DEFAULT_CATALOG_BY_NAME
    definition = _check_schema(action, defs)

    # Backend-level stochastic failure; the draw happens on every apply.
    if rng.random() < failure_prob:
        return _fail()

    handler = _HANDLERS[action.name] if action.name in _HANDLERS else None
    if handler is None:
        raise MalformedActionError(f"no semantics for action {action.name!r}")
    return handler(action, definition, world, knowledge, flawed_routing)


def _apply_sleep(action, definition, world, knowledge, flawed) -> ActionOutcome:
    return ActionOutcome(SUCCESS_TRUE)


def _apply_ipconfig(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = _owned_session(world, knowledge, action.params.session)
    if session is None:
        return _fail()
    host = world.hosts[session.host]
    iface = host.interface()
    subnet = world.subnets[iface.subnet_id]
    facts = (
        ("interface", session.host, iface.ip, iface.subnet_id),
        ("subnet", iface.subnet_id, subnet.descriptor),
    )
    return ActionOutcome(SUCCESS_TRUE, {"inspected_host": session.host}, facts)


def _framework_session(world, knowledge, sid) -> Session | None:
    session = _owned_session(world, knowledge, sid)
    if session is None:
        return None
    if not world.hosts[session.host].runs_framework_server():
        return None
    return session


def _apply_pingsweep(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = (
        _framework_session(world, knowledge, action.params.session)
        if definition.framework
        else _owned_session(world, knowledge, action.params.session)
    )
    if session is None:
        return _fail()
    subnet_id = action.params.target_subnet
    if subnet_id not in world.subnets or subnet_id not in knowledge.known_subnets:
        return _fail()
    if not _subnet_boundary_reachable(world, knowledge, session.host, subnet_id, PROTO_ICMP, None):
        return _fail()
    facts = [("swept", subnet_id)]
    for host_id, host in world.hosts.items():
        iface = host.interface()
        if iface.subnet_id != subnet_id:
            continue
        if reachable(world, knowledge, session.host, iface.ip, PROTO_ICMP):
            facts.append(("interface", host_id, iface.ip, iface.subnet_id))
    return ActionOutcome(SUCCESS_TRUE, {"swept_subnet": subnet_id}, tuple(facts))


def _known_target(world, knowledge, ip):
    """Resolve a target the agent has already discovered, else None."""
    if ip is None:
        return None
    for host_id, (known_ip, _subnet) in knowledge.interfaces.items():
        if known_ip == ip:
            target = world.hosts.get(host_id)
            if target is not None and target.interface().ip == ip:
                return target
    return None


def _apply_portscan(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = (
        _framework_session(world, knowledge, action.params.session)
        if definition.framework
        else _owned_session(world, knowledge, action.params.session)
    )
    if session is None:
        return _fail()
    target = _known_target(world, knowledge, action.params.target_ip)
    if target is None:
        return _fail()
    facts = []
    for svc in target.services:
        if not svc.running:
            continue
        if reachable(world, knowledge, session.host, action.params.target_ip, PROTO_TCP, svc.spec.port):
            facts.append(("port", target.spec.id, svc.spec.port))
    return ActionOutcome(SUCCESS_TRUE, {"scanned_host": target.spec.id}, tuple(facts))


def _apply_bruteforce(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = (
        _framework_session(world, knowledge, action.params.session)
        if definition.framework
        else _owned_session(world, knowledge, action.params.session)
    )
    if session is None:
        return _fail()
    target = _known_target(world, knowledge, action.params.target_ip)
    if target is None:
        return _fail()
    if (target.spec.id, SSH_PORT) not in knowledge.known_ports:
        return _fail()
    if not reachable(world, knowledge, session.host, action.params.target_ip, PROTO_TCP, SSH_PORT):
        return _fail()
    service = target.service_on(SSH_PORT)
    if service is None or not service.running or service.spec.credentials is None:
        return _fail()
    username, password = service.spec.credentials
    for owned in world.agent_sessions(knowledge.agent):
        if owned.host == target.spec.id and owned.username == username:
            return _fail()  # foothold with these credentials already exists
    new = world.create_session(knowledge.agent, target.spec.id, username, PRIV_USER, KIND_SHELL)
    facts = session_facts(new, target)
    facts.append(("credential", target.spec.id, username, password))
    return ActionOutcome(SUCCESS_TRUE, {"new_sessions": [new.id]}, tuple(facts))


def _apply_upgrade(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = _owned_session(world, knowledge, action.params.session)
    if session is None or session.kind != KIND_SHELL:
        return _fail()
    session.kind = KIND_METERPRETER
    facts = (
        ("session", session.id, session.host, session.username, session.kind, session.privilege),
    )
    return ActionOutcome(SUCCESS_TRUE, {"upgraded_session": session.id}, facts)


def _apply_autoroute(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = _owned_session(world, knowledge, action.params.session)
    if session is None or session.kind != KIND_METERPRETER:
        return _fail()
    subnet_id = action.params.target_subnet
    if subnet_id not in world.subnets:
        return _fail()
    host = world.hosts[session.host]
    if all(iface.subnet_id != subnet_id for iface in host.interfaces):
        return _fail()
    route = Route(session.id, subnet_id)
    delta = {}
    if route not in world.routes:
        world.routes.add(route)
        delta["new_routes"] = [[route.via_session, route.target_subnet]]
    return ActionOutcome(SUCCESS_TRUE, delta, (("route", subnet_id),))


def _apply_psexec(action, definition, world, knowledge, flawed) -> ActionOutcome:
    session = (
        _framework_session(world, knowledge, action.params.session)
        if definition.framework
        else _owned_session(world, knowledge, action.params.session)
    )
    if session is None:
        return _fail()
    target = _known_target(world, knowledge, action.params.target_ip)
    if target is None:
        return _fail()
    if not flawed:
        if (target.spec.id, SMB_PORT) not in knowledge.known_ports:
            return _fail()
        if not reachable(world, knowledge, session.host, action.params.target_ip, PROTO_TCP, SMB_PORT):
            return _fail()
    service = target.service_on(SMB_PORT)
    if service is None or not service.running or ETERNAL_BLUE not in service.spec.vulnerabilities:
        return _fail()
    for owned in world.agent_sessions(knowledge.agent):
        if owned.host == target.spec.id and owned.privilege == PRIV_SYSTEM:
            return _fail()  # System access already obtained
    username = next((u.username for u in target.users if u.privileged), "SYSTEM")
    new = world.create_session(
        knowledge.agent, target.spec.id, username, PRIV_SYSTEM, KIND_METERPRETER
    )
    return ActionOutcome(SUCCESS_TRUE, {"new_sessions": [new.id]}, tuple(session_facts(new, target)))


_HANDLERS = {
    cat.SLEEP: _apply_sleep,
    cat.IPCONFIG: _apply_ipconfig,
    cat.PINGSWEEP: _apply_pingsweep,
    cat.PORTSCAN: _apply_portscan,
    cat.SSH_BRUTEFORCE: _apply_bruteforce,
    cat.UPGRADE_TO_METERPRETER: _apply_upgrade,
    cat.AUTOROUTE: _apply_autoroute,
    cat.MS17_010_PSEXEC: _apply_psexec,
}
