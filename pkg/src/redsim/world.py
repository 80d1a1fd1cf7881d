"""Ground-truth world state and per-agent knowledge.

The world is a finite state machine instantiated from a Scenario with a
seeded RNG: subnets draw random private address pools, hosts draw random
addresses inside them. Agent knowledge is an append-only set of observed
facts; everything an agent is shown downstream derives from it.

Fact atoms (hashable tuples, first element is the kind):
    ("subnet", subnet_id, descriptor)
    ("swept", subnet_id)
    ("interface", host_id, ip, subnet_id)
    ("port", host_id, port)
    ("os", host_id, summary)
    ("credential", host_id, username, password)
    ("user", host_id, username, uid)
    ("session", session_id, host_id, username, kind, privilege)
    ("route", subnet_id)

Sessions upgrade in place (Shell -> Meterpreter); the upgrade appends a new
session atom rather than replacing the old one, so the atom set only grows.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .catalog import FRAMEWORK_PROCESS_NAMES
from .errors import AddressPoolExhausted
from .scenario import (
    HostSpec,
    ImageSpec,
    KnowledgeFactSpec,
    PROTO_TCP,
    PRIV_SYSTEM,
    PRIV_USER,
    Scenario,
    ServiceSpec,
    SubnetSpec,
    UserSpec,
    validate,
)

KIND_SHELL = "Shell"
KIND_METERPRETER = "Meterpreter"

_KIND_ORDER = {KIND_SHELL: 1, KIND_METERPRETER: 2}


@dataclass
class Interface:
    ip: str
    subnet_id: str


@dataclass
class ServiceState:
    spec: ServiceSpec
    running: bool = True


@dataclass
class ProcessState:
    spec: object
    alive: bool = True


@dataclass(frozen=True)
class FileRecord:
    path: str
    owner: str


@dataclass
class Session:
    id: int
    agent: str
    host: str
    username: str
    privilege: str
    kind: str


@dataclass(frozen=True)
class Route:
    via_session: int
    target_subnet: str


@dataclass
class HostState:
    spec: HostSpec
    image: ImageSpec
    interfaces: list[Interface]
    services: list[ServiceState]
    processes: list[ProcessState]
    users: tuple[UserSpec, ...]
    files: set[FileRecord] = field(default_factory=set)

    def interface(self) -> Interface:
        return self.interfaces[0]

    def service_on(self, port: int) -> ServiceState | None:
        for svc in self.services:
            if svc.spec.port == port:
                return svc
        return None

    def user(self, username: str) -> UserSpec | None:
        for user in self.users:
            if user.username == username:
                return user
        return None

    def runs_framework_server(self) -> bool:
        return any(
            proc.alive and proc.spec.name in FRAMEWORK_PROCESS_NAMES for proc in self.processes
        )


@dataclass
class SubnetState:
    spec: SubnetSpec
    descriptor: str  # CIDR-style range label, e.g. "10.96.17.0/24"
    pool: list[str]  # usable addresses, already shuffled


class WorldState:
    """Mutable ground truth for one environment instance."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.step = 0
        self.hosts: dict[str, HostState] = {}
        self.subnets: dict[str, SubnetState] = {}
        self.sessions: dict[int, Session] = {}
        self.routes: set[Route] = set()
        self._next_session_id = 0

    def create_session(self, agent: str, host: str, username: str, privilege: str, kind: str) -> Session:
        session = Session(self._next_session_id, agent, host, username, privilege, kind)
        self.sessions[session.id] = session
        self._next_session_id += 1
        return session

    def host_by_ip(self, ip: str) -> HostState | None:
        for host in self.hosts.values():
            for iface in host.interfaces:
                if iface.ip == ip:
                    return host
        return None

    def agent_sessions(self, agent: str) -> list[Session]:
        return [s for s in self.sessions.values() if s.agent == agent]

    def clone(self) -> "WorldState":
        """Copy the parts actions mutate (sessions, routes, step counter).

        Host and subnet tables are shared: no catalog action rewrites them,
        which the effect-locality tests enforce.
        """
        other = WorldState.__new__(WorldState)
        other.scenario = self.scenario
        other.seed = self.seed
        other.step = self.step
        other.hosts = self.hosts
        other.subnets = self.subnets
        other.sessions = {
            sid: Session(s.id, s.agent, s.host, s.username, s.privilege, s.kind)
            for sid, s in self.sessions.items()
        }
        other.routes = set(self.routes)
        other._next_session_id = self._next_session_id
        return other


@dataclass(frozen=True)
class SessionFact:
    """What the owning agent knows about one of its sessions."""

    id: int
    host: str
    username: str
    kind: str
    privilege: str

    def level(self) -> int:
        # none=0 / shell=1 / meterpreter=2 / system=3; System privilege wins.
        if self.privilege == PRIV_SYSTEM:
            return 3
        return _KIND_ORDER[self.kind]


class AgentKnowledge:
    """Append-only record of what one agent has observed."""

    def __init__(self, agent: str):
        self.agent = agent
        self.atoms: set[tuple] = set()
        self.known_subnets: dict[str, str] = {}
        self.swept_subnets: set[str] = set()
        self.interfaces: dict[str, tuple[str, str]] = {}  # host -> (ip, subnet)
        self.known_ports: set[tuple[str, int]] = set()
        self.known_os: dict[str, str] = {}
        self.credentials: set[tuple[str, str, str]] = set()
        self.known_users: set[tuple[str, str, int]] = set()
        self.sessions: dict[int, SessionFact] = {}
        self.routed_subnets: set[str] = set()

    @property
    def known_ips(self) -> set[tuple[str, str]]:
        return {(ip, host) for host, (ip, _subnet) in self.interfaces.items()}

    @property
    def owned_sessions(self) -> set[int]:
        return set(self.sessions)

    def hosts_known(self) -> set[str]:
        """Hosts the agent holds at least one fact about."""
        known = set(self.interfaces) | set(self.known_os)
        known.update(host for host, _port in self.known_ports)
        known.update(host for host, _u, _p in self.credentials)
        known.update(host for host, _u, _uid in self.known_users)
        known.update(fact.host for fact in self.sessions.values())
        return known

    def session_level(self, host: str) -> int:
        levels = [f.level() for f in self.sessions.values() if f.host == host]
        return max(levels, default=0)

    def apply(self, facts) -> int:
        """Fold new fact atoms in; returns how many were genuinely new."""
        new = 0
        for atom in facts:
            if atom in self.atoms:
                continue
            self.atoms.add(atom)
            new += 1
            kind = atom[0]
            if kind == "subnet":
                self.known_subnets[atom[1]] = atom[2]
            elif kind == "swept":
                self.swept_subnets.add(atom[1])
            elif kind == "interface":
                self.interfaces[atom[1]] = (atom[2], atom[3])
            elif kind == "port":
                self.known_ports.add((atom[1], atom[2]))
            elif kind == "os":
                self.known_os[atom[1]] = atom[2]
            elif kind == "credential":
                self.credentials.add((atom[1], atom[2], atom[3]))
            elif kind == "user":
                self.known_users.add((atom[1], atom[2], atom[3]))
            elif kind == "session":
                _k, sid, host, username, skind, priv = atom
                fact = SessionFact(sid, host, username, skind, priv)
                current = self.sessions.get(sid)
                if current is None or fact.level() >= current.level():
                    self.sessions[sid] = fact
            elif kind == "route":
                self.routed_subnets.add(atom[1])
            else:
                raise ValueError(f"unknown fact kind {kind!r}")
        return new

    def clone(self) -> "AgentKnowledge":
        other = AgentKnowledge(self.agent)
        other.atoms = set(self.atoms)
        other.known_subnets = dict(self.known_subnets)
        other.swept_subnets = set(self.swept_subnets)
        other.interfaces = dict(self.interfaces)
        other.known_ports = set(self.known_ports)
        other.known_os = dict(self.known_os)
        other.credentials = set(self.credentials)
        other.known_users = set(self.known_users)
        other.sessions = dict(self.sessions)
        other.routed_subnets = set(self.routed_subnets)
        return other


def session_facts(session: Session, host: HostState) -> list[tuple]:
    """Atoms an agent learns by holding a session on a host."""
    facts = [
        ("session", session.id, session.host, session.username, session.kind, session.privilege),
        ("os", session.host, host.image.os.summary()),
    ]
    user = host.user(session.username)
    if user is not None:
        facts.append(("user", session.host, user.username, user.uid))
    return facts


def _pick_username(host: HostState, privilege: str, explicit: str | None) -> str:
    if explicit is not None:
        return explicit
    wants_priv = privilege == PRIV_SYSTEM
    for user in host.users:
        if user.privileged == wants_priv:
            return user.username
    if host.users:
        return host.users[0].username
    return "nobody"


def instantiate(scenario: Scenario, seed: int):
    """Build (WorldState, {agent name: AgentKnowledge}) from a scenario.

    Deterministic: equal (scenario, seed) give bit-identical serialized
    states. Subnet pools are drawn from 10.0.0.0/8 slices and host
    addresses are random picks inside their subnet's pool.
    """
    diagnostics = validate(scenario)
    if diagnostics:
        raise ValueError(f"scenario does not validate: {diagnostics[0]}")

    rng = random.Random(seed)
    world = WorldState(scenario, seed)

    taken_slices: set[tuple[int, int]] = set()
    for spec in scenario.subnets:
        while True:
            piece = (rng.randrange(0, 256), rng.randrange(0, 256))
            if piece not in taken_slices:
                taken_slices.add(piece)
                break
        base = f"10.{piece[0]}.{piece[1]}"
        size = min(spec.size, 254)
        pool = [f"{base}.{offset}" for offset in rng.sample(range(1, 255), size)]
        world.subnets[spec.id] = SubnetState(spec, f"{base}.0/24", pool)

    cursors = {sid: 0 for sid in world.subnets}
    for host_spec in scenario.hosts:
        subnet = world.subnets[host_spec.subnet_id]
        cursor = cursors[host_spec.subnet_id]
        if cursor >= len(subnet.pool):
            raise AddressPoolExhausted(
                f"subnet '{host_spec.subnet_id}' ran out of addresses at host '{host_spec.id}'"
            )
        ip = subnet.pool[cursor]
        cursors[host_spec.subnet_id] = cursor + 1
        image = scenario.images[host_spec.image]
        world.hosts[host_spec.id] = HostState(
            spec=host_spec,
            image=image,
            interfaces=[Interface(ip, host_spec.subnet_id)],
            services=[ServiceState(svc) for svc in image.services],
            processes=[ProcessState(proc) for proc in image.processes],
            users=image.users,
        )

    knowledge = {agent.name: AgentKnowledge(agent.name) for agent in scenario.agents}
    for agent in scenario.agents:
        know = knowledge[agent.name]
        for start in agent.starting_sessions:
            host = world.hosts[start.host]
            username = _pick_username(host, start.privilege, start.username)
            session = world.create_session(
                agent.name, start.host, username, start.privilege, KIND_SHELL
            )
            know.apply(session_facts(session, host))
        for fact in agent.starting_knowledge:
            know.apply(_starting_fact_atoms(world, fact))
    return world, knowledge


def _starting_fact_atoms(world: WorldState, fact: KnowledgeFactSpec) -> list[tuple]:
    if fact.kind == "subnet_range":
        subnet = world.subnets[fact.subnet]
        return [("subnet", fact.subnet, subnet.descriptor)]
    if fact.kind == "host_ip":
        host = world.hosts[fact.host]
        iface = host.interface()
        return [("interface", fact.host, iface.ip, iface.subnet_id)]
    raise ValueError(f"unknown starting knowledge kind {fact.kind!r}")


# ---------------------------------------------------------------------------
# Reachability


def _rules_for(scenario: Scenario, src: str, dst: str, protocol: str, port: int | None):
    for rule in scenario.firewall_rules:
        if rule.src_subnet != src or rule.dst_subnet != dst or rule.protocol != protocol:
            continue
        if protocol == PROTO_TCP and rule.port != port:
            continue
        yield rule


def firewall_allows(scenario: Scenario, src: str, dst: str, protocol: str, port: int | None) -> bool:
    """Default-deny across subnet boundaries; deny rules override allows."""
    if src == dst:
        return True
    allowed = False
    for rule in _rules_for(scenario, src, dst, protocol, port):
        if not rule.allow:
            return False
        allowed = True
    return allowed


def reachable(
    state: WorldState,
    knowledge: AgentKnowledge,
    from_host: str,
    to_ip: str,
    protocol: str,
    port: int | None = None,
) -> bool:
    """Can traffic of (protocol, port) get from from_host to to_ip?

    True when the endpoints share a subnet, a firewall rule allows the
    crossing, or the asking agent owns a route into the target's subnet.
    An address that belongs to no interface is unreachable, not an error.
    """
    source = state.hosts[from_host]
    target = state.host_by_ip(to_ip)
    if target is None:
        return False
    src_subnet = source.interface().subnet_id
    dst_subnet = target.interface().subnet_id
    if src_subnet == dst_subnet:
        return True
    if firewall_allows(state.scenario, src_subnet, dst_subnet, protocol, port):
        return True
    for route in state.routes:
        if route.target_subnet != dst_subnet:
            continue
        via = state.sessions.get(route.via_session)
        if via is not None and via.agent == knowledge.agent:
            return True
    return False


# ---------------------------------------------------------------------------
# Debug serialization


def world_tree(state: WorldState) -> dict:
    """Plain nested structure of the full world, stable ordering."""
    return {
        "scenario": state.scenario.name,
        "seed": state.seed,
        "step": state.step,
        "subnets": {
            sid: {"descriptor": sub.descriptor, "pool": list(sub.pool)}
            for sid, sub in sorted(state.subnets.items())
        },
        "hosts": {
            hid: {
                "image": host.image.id,
                "interfaces": [
                    {"ip": iface.ip, "subnet": iface.subnet_id} for iface in host.interfaces
                ],
                "services": [
                    {"name": svc.spec.name, "port": svc.spec.port, "running": svc.running}
                    for svc in host.services
                ],
                "processes": [
                    {"pid": proc.spec.pid, "name": proc.spec.name, "alive": proc.alive}
                    for proc in host.processes
                ],
                "users": [user.username for user in host.users],
                "files": sorted((f.path, f.owner) for f in host.files),
            }
            for hid, host in sorted(state.hosts.items())
        },
        "sessions": [
            {
                "id": s.id,
                "agent": s.agent,
                "host": s.host,
                "username": s.username,
                "privilege": s.privilege,
                "kind": s.kind,
            }
            for _sid, s in sorted(state.sessions.items())
        ],
        "routes": sorted((r.via_session, r.target_subnet) for r in state.routes),
    }


def serialize_world(state: WorldState) -> str:
    """Canonical ordered text form of the world, for golden/no-op checks."""
    return json.dumps(world_tree(state), sort_keys=True, separators=(",", ":"))


def audit_world(state: WorldState) -> list[str]:
    """Check WorldState invariants; returns one message per violation."""
    problems = []
    for sid, session in state.sessions.items():
        if session.host not in state.hosts:
            problems.append(f"session {sid} references unknown host {session.host!r}")
            continue
        host = state.hosts[session.host]
        if host.user(session.username) is None:
            problems.append(f"session {sid} username {session.username!r} not on host")
    for route in state.routes:
        via = state.sessions.get(route.via_session)
        if via is None:
            problems.append(f"route via unknown session {route.via_session}")
            continue
        host = state.hosts[via.host]
        if all(iface.subnet_id != route.target_subnet for iface in host.interfaces):
            problems.append(
                f"route via session {route.via_session} targets subnet "
                f"{route.target_subnet!r} its host is not on"
            )
        if via.kind != KIND_METERPRETER:
            problems.append(f"route via session {route.via_session} which is not Meterpreter")
    ids = sorted(state.sessions)
    if ids != list(range(len(ids))):
        problems.append(f"session ids not dense from zero: {ids}")
    seen_ips = set()
    for hid, host in state.hosts.items():
        if len(host.interfaces) != 1:
            problems.append(f"host {hid} has {len(host.interfaces)} interfaces")
        for iface in host.interfaces:
            if iface.ip in seen_ips:
                problems.append(f"duplicate ip {iface.ip}")
            seen_ips.add(iface.ip)
        pids = [p.spec.pid for p in host.processes]
        if len(pids) != len(set(pids)):
            problems.append(f"host {hid} has duplicate pids")
    return problems
