"""Declarative scenario model: file parsing, validation, and the built-in game.

A scenario bundle is three text files (scenario, images, optional actions)
in a strict YAML subset: block mappings and lists, plain scalars, no
anchors, aliases, or tags. ``docs/file-formats.md`` documents the schema;
the built-in bundle under ``redsim/data/builtin`` is the annotated example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import yaml

from .catalog import ActionDef, DEFAULT_CATALOG, validate_catalog
from .errors import ScenarioInvariantError, ScenarioReferenceError, ScenarioSyntaxError

OS_LINUX = "Linux"
OS_WINDOWS = "Windows"
PROTO_ICMP = "ICMP"
PROTO_TCP = "TCP"
PRIV_USER = "User"
PRIV_SYSTEM = "System"
GOAL_PRIVILEGED_SESSION = "PrivilegedSessionOn"

DEFAULT_MAX_STEPS = 20
DEFAULT_GOAL_REWARD = 10.0
DEFAULT_USER_SESSION_REWARD = 3.0
DEFAULT_DISCOVERY_REWARD = 0.1


@dataclass(frozen=True)
class OsInfo:
    os_type: str
    distribution: str
    version: str
    patches: tuple[str, ...] = ()
    architecture: str = "x86_64"

    def summary(self) -> str:
        return f"{self.os_type} {self.distribution} {self.version}"


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    port: int
    credentials: tuple[str, str] | None = None
    vulnerabilities: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProcessSpec:
    pid: int
    ppid: int
    name: str
    owner: str
    connections: tuple[tuple[int, str], ...] = ()


@dataclass(frozen=True)
class UserSpec:
    username: str
    uid: int
    groups: tuple[str, ...] = ()
    gids: tuple[int, ...] = ()
    password: str | None = None
    password_hash: str | None = None
    privileged: bool = False


@dataclass(frozen=True)
class ImageSpec:
    id: str
    os: OsInfo
    services: tuple[ServiceSpec, ...] = ()
    processes: tuple[ProcessSpec, ...] = ()
    users: tuple[UserSpec, ...] = ()
    # Deployable-image identifier; parsed and retained, unused by the simulator.
    deploy_id: str | None = None


@dataclass(frozen=True)
class SubnetSpec:
    id: str
    size: int


@dataclass(frozen=True)
class HostSpec:
    id: str
    image: str
    subnet_id: str


@dataclass(frozen=True)
class FirewallRule:
    src_subnet: str
    dst_subnet: str
    protocol: str
    port: int | None
    allow: bool


@dataclass(frozen=True)
class StartingSession:
    host: str
    privilege: str
    username: str | None = None


@dataclass(frozen=True)
class KnowledgeFactSpec:
    """Starting-knowledge descriptor: a subnet range or a host address."""

    kind: str  # "subnet_range" | "host_ip"
    subnet: str | None = None
    host: str | None = None


@dataclass(frozen=True)
class AgentSpec:
    name: str
    team: str = "Red"
    allowed_actions: tuple[str, ...] = ()
    starting_sessions: tuple[StartingSession, ...] = ()
    starting_knowledge: tuple[KnowledgeFactSpec, ...] = ()


@dataclass(frozen=True)
class GoalSpec:
    kind: str
    host: str
    privilege: str


@dataclass(frozen=True)
class RewardSpec:
    goal_reward: float = DEFAULT_GOAL_REWARD
    user_session_reward: float = DEFAULT_USER_SESSION_REWARD
    discovery_reward: float = DEFAULT_DISCOVERY_REWARD


@dataclass(frozen=True)
class Scenario:
    name: str
    subnets: tuple[SubnetSpec, ...]
    hosts: tuple[HostSpec, ...]
    firewall_rules: tuple[FirewallRule, ...]
    agents: tuple[AgentSpec, ...]
    max_steps: int
    goal: GoalSpec | None
    rewards: RewardSpec
    images: dict[str, ImageSpec] = field(default_factory=dict)
    action_catalog: dict[str, ActionDef] = field(default_factory=dict)

    def subnet_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subnets)

    def host_ids(self) -> tuple[str, ...]:
        return tuple(h.id for h in self.hosts)

    def image_for(self, host: HostSpec) -> ImageSpec:
        return self.images[host.image]


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding with a stable code.

    ``subject`` carries the offending name when the finding is about one
    (a dangling reference, a duplicate id).
    """

    code: str
    message: str
    subject: str | None = None

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


# ---------------------------------------------------------------------------
# Parsing


def _load_strict(text: str, filename: str) -> object:
    """Parse the YAML subset: block structures, no anchors/aliases/tags."""
    try:
        for tok in yaml.scan(text):
            if isinstance(tok, (yaml.AnchorToken, yaml.AliasToken, yaml.TagToken)):
                mark = tok.start_mark
                raise ScenarioSyntaxError(
                    "anchors, aliases and tags are not part of the file grammar",
                    line=mark.line,
                    column=mark.column,
                    filename=filename,
                )
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ScenarioSyntaxError(
            exc.problem or "invalid syntax",
            line=mark.line if mark else None,
            column=mark.column if mark else None,
            filename=filename,
        ) from exc
    except yaml.YAMLError as exc:
        raise ScenarioSyntaxError(str(exc), filename=filename) from exc
    return data if data is not None else {}


class _Node:
    """Cursor over parsed mappings with schema-aware error messages."""

    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise ScenarioInvariantError(f"{path} must be a mapping", field=path)
        self.data = data
        self.path = path

    def req(self, key: str):
        if key not in self.data:
            raise ScenarioInvariantError(f"{self.path}.{key} is required", field=f"{self.path}.{key}")
        return self.data[key]

    def opt(self, key: str, default=None):
        return self.data.get(key, default)

    def str_(self, key: str, required: bool = True, default: str | None = None) -> str | None:
        value = self.req(key) if required else self.opt(key, default)
        if value is None and not required:
            return default
        if not isinstance(value, str):
            raise ScenarioInvariantError(
                f"{self.path}.{key} must be a string", field=f"{self.path}.{key}"
            )
        return value

    def int_(self, key: str, required: bool = True, default: int | None = None) -> int | None:
        value = self.req(key) if required else self.opt(key, default)
        if value is None and not required:
            return default
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioInvariantError(
                f"{self.path}.{key} must be an integer", field=f"{self.path}.{key}"
            )
        return value

    def num(self, key: str, required: bool = True, default: float | None = None) -> float | None:
        value = self.req(key) if required else self.opt(key, default)
        if value is None and not required:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioInvariantError(
                f"{self.path}.{key} must be a number", field=f"{self.path}.{key}"
            )
        return float(value)

    def bool_(self, key: str, required: bool = True, default: bool | None = None) -> bool | None:
        value = self.req(key) if required else self.opt(key, default)
        if value is None and not required:
            return default
        if not isinstance(value, bool):
            raise ScenarioInvariantError(
                f"{self.path}.{key} must be a boolean", field=f"{self.path}.{key}"
            )
        return value

    def list_(self, key: str, default=()) -> list:
        value = self.opt(key)
        if value is None:
            return list(default)
        if not isinstance(value, list):
            raise ScenarioInvariantError(
                f"{self.path}.{key} must be a list", field=f"{self.path}.{key}"
            )
        return value

    def str_list(self, key: str) -> tuple[str, ...]:
        items = self.list_(key)
        for i, item in enumerate(items):
            if not isinstance(item, str):
                raise ScenarioInvariantError(
                    f"{self.path}.{key}[{i}] must be a string", field=f"{self.path}.{key}"
                )
        return tuple(items)


def _parse_os(node: _Node) -> OsInfo:
    os_type = node.str_("os_type")
    if os_type not in (OS_LINUX, OS_WINDOWS):
        raise ScenarioInvariantError(
            f"{node.path}.os_type must be Linux or Windows", field=f"{node.path}.os_type"
        )
    return OsInfo(
        os_type=os_type,
        distribution=node.str_("distribution"),
        version=str(node.req("version")),
        patches=node.str_list("patches"),
        architecture=node.str_("architecture", required=False, default="x86_64"),
    )


def _parse_service(node: _Node) -> ServiceSpec:
    port = node.int_("port")
    if not 1 <= port <= 65535:
        raise ScenarioInvariantError(
            f"{node.path}.port must be in 1..65535", field=f"{node.path}.port"
        )
    creds = None
    raw = node.opt("credentials")
    if raw is not None:
        creds_node = _Node(raw, f"{node.path}.credentials")
        creds = (creds_node.str_("username"), creds_node.str_("password"))
    return ServiceSpec(
        name=node.str_("name"),
        port=port,
        credentials=creds,
        vulnerabilities=node.str_list("vulnerabilities"),
    )


def _parse_process(node: _Node) -> ProcessSpec:
    conns = []
    for i, raw in enumerate(node.list_("connections")):
        conn = _Node(raw, f"{node.path}.connections[{i}]")
        conns.append((conn.int_("local_port"), conn.str_("remote_address")))
    return ProcessSpec(
        pid=node.int_("pid"),
        ppid=node.int_("ppid"),
        name=node.str_("name"),
        owner=node.str_("owner"),
        connections=tuple(conns),
    )


def _parse_user(node: _Node) -> UserSpec:
    gids = []
    for i, raw in enumerate(node.list_("gids")):
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ScenarioInvariantError(
                f"{node.path}.gids[{i}] must be an integer", field=f"{node.path}.gids"
            )
        gids.append(raw)
    return UserSpec(
        username=node.str_("username"),
        uid=node.int_("uid"),
        groups=node.str_list("groups"),
        gids=tuple(gids),
        password=node.str_("password", required=False),
        password_hash=node.str_("password_hash", required=False),
        privileged=node.bool_("privileged", required=False, default=False),
    )


def _parse_image(node: _Node) -> ImageSpec:
    return ImageSpec(
        id=node.str_("id"),
        os=_parse_os(_Node(node.req("os"), f"{node.path}.os")),
        services=tuple(
            _parse_service(_Node(raw, f"{node.path}.services[{i}]"))
            for i, raw in enumerate(node.list_("services"))
        ),
        processes=tuple(
            _parse_process(_Node(raw, f"{node.path}.processes[{i}]"))
            for i, raw in enumerate(node.list_("processes"))
        ),
        users=tuple(
            _parse_user(_Node(raw, f"{node.path}.users[{i}]"))
            for i, raw in enumerate(node.list_("users"))
        ),
        deploy_id=node.str_("deploy_id", required=False),
    )


def _parse_firewall_rule(node: _Node) -> FirewallRule:
    protocol = node.str_("protocol")
    if protocol not in (PROTO_ICMP, PROTO_TCP):
        raise ScenarioInvariantError(
            f"{node.path}.protocol must be ICMP or TCP", field=f"{node.path}.protocol"
        )
    port = node.int_("port", required=(protocol == PROTO_TCP))
    if protocol == PROTO_ICMP and port is not None:
        raise ScenarioInvariantError(
            f"{node.path}.port is only valid for TCP rules", field=f"{node.path}.port"
        )
    return FirewallRule(
        src_subnet=node.str_("src_subnet"),
        dst_subnet=node.str_("dst_subnet"),
        protocol=protocol,
        port=port,
        allow=node.bool_("allow"),
    )


def _parse_agent(node: _Node) -> AgentSpec:
    sessions = []
    for i, raw in enumerate(node.list_("starting_sessions")):
        sess = _Node(raw, f"{node.path}.starting_sessions[{i}]")
        privilege = sess.str_("privilege", required=False, default=PRIV_USER)
        if privilege not in (PRIV_USER, PRIV_SYSTEM):
            raise ScenarioInvariantError(
                f"{sess.path}.privilege must be User or System", field=f"{sess.path}.privilege"
            )
        sessions.append(
            StartingSession(
                host=sess.str_("host"),
                privilege=privilege,
                username=sess.str_("username", required=False),
            )
        )
    facts = []
    for i, raw in enumerate(node.list_("starting_knowledge")):
        fact = _Node(raw, f"{node.path}.starting_knowledge[{i}]")
        kind = fact.str_("kind")
        if kind not in ("subnet_range", "host_ip"):
            raise ScenarioInvariantError(
                f"{fact.path}.kind must be subnet_range or host_ip", field=f"{fact.path}.kind"
            )
        facts.append(
            KnowledgeFactSpec(
                kind=kind,
                subnet=fact.str_("subnet", required=(kind == "subnet_range")),
                host=fact.str_("host", required=(kind == "host_ip")),
            )
        )
    return AgentSpec(
        name=node.str_("name"),
        team=node.str_("team", required=False, default="Red"),
        allowed_actions=node.str_list("allowed_actions"),
        starting_sessions=tuple(sessions),
        starting_knowledge=tuple(facts),
    )


def _parse_actions_catalog(text: str | None) -> dict[str, ActionDef]:
    """Parse an actions file into the catalog it selects."""
    if text is None:
        return {d.name: d for d in DEFAULT_CATALOG}
    data = _load_strict(text, "actions")
    root = _Node(data, "actions")
    defs: dict[str, ActionDef] = {}
    for i, raw in enumerate(root.list_("actions")):
        node = _Node(raw, f"actions[{i}]")
        name = node.str_("name")
        base = next((d for d in DEFAULT_CATALOG if d.name == name), None)
        params = node.opt("params")
        if params is None:
            param_tuple = base.params if base else ()
        else:
            param_tuple = node.str_list("params")
        framework = node.bool_(
            "requires_framework", required=False, default=base.framework if base else False
        )
        if name in defs:
            raise ScenarioInvariantError(
                f"actions[{i}] duplicates action {name!r}", field=f"actions[{i}].name"
            )
        defs[name] = ActionDef(name=name, params=param_tuple, framework=framework)
    if not defs:
        raise ScenarioInvariantError("actions file lists no actions", field="actions")
    validate_catalog(defs)
    return defs


def parse_scenario(scenario_text: str, images_text: str, actions_text: str | None = None) -> Scenario:
    """Parse a scenario bundle into a validated Scenario.

    Raises ScenarioSyntaxError (with line/column) for malformed text,
    ScenarioReferenceError for dangling names, and ScenarioInvariantError
    for structural violations. Pure: equal inputs give equal outputs.
    """
    images_data = _load_strict(images_text, "images")
    images_root = _Node(images_data, "images")
    images: dict[str, ImageSpec] = {}
    for i, raw in enumerate(images_root.list_("images")):
        image = _parse_image(_Node(raw, f"images[{i}]"))
        if image.id in images:
            raise ScenarioInvariantError(
                f"images[{i}] duplicates image id {image.id!r}", field=f"images[{i}].id"
            )
        images[image.id] = image

    data = _load_strict(scenario_text, "scenario")
    root = _Node(data, "scenario")
    subnets = []
    for i, raw in enumerate(root.list_("subnets")):
        node = _Node(raw, f"scenario.subnets[{i}]")
        subnets.append(SubnetSpec(id=node.str_("id"), size=node.int_("size")))
    hosts = []
    for i, raw in enumerate(root.list_("hosts")):
        node = _Node(raw, f"scenario.hosts[{i}]")
        hosts.append(
            HostSpec(id=node.str_("id"), image=node.str_("image"), subnet_id=node.str_("subnet"))
        )
    rules = tuple(
        _parse_firewall_rule(_Node(raw, f"scenario.firewall_rules[{i}]"))
        for i, raw in enumerate(root.list_("firewall_rules"))
    )
    agents = tuple(
        _parse_agent(_Node(raw, f"scenario.agents[{i}]"))
        for i, raw in enumerate(root.list_("agents"))
    )
    goal = None
    raw_goal = root.opt("goal")
    if raw_goal is not None:
        node = _Node(raw_goal, "scenario.goal")
        kind = node.str_("kind", required=False, default=GOAL_PRIVILEGED_SESSION)
        if kind != GOAL_PRIVILEGED_SESSION:
            raise ScenarioInvariantError(
                "scenario.goal.kind must be PrivilegedSessionOn", field="scenario.goal.kind"
            )
        privilege = node.str_("privilege", required=False, default=PRIV_SYSTEM)
        if privilege != PRIV_SYSTEM:
            raise ScenarioInvariantError(
                "scenario.goal.privilege must be System", field="scenario.goal.privilege"
            )
        goal = GoalSpec(kind=kind, host=node.str_("host"), privilege=privilege)
    rewards = RewardSpec()
    raw_rewards = root.opt("rewards")
    if raw_rewards is not None:
        node = _Node(raw_rewards, "scenario.rewards")
        rewards = RewardSpec(
            goal_reward=node.num("goal_reward", required=False, default=DEFAULT_GOAL_REWARD),
            user_session_reward=node.num(
                "user_session_reward", required=False, default=DEFAULT_USER_SESSION_REWARD
            ),
            discovery_reward=node.num(
                "discovery_reward", required=False, default=DEFAULT_DISCOVERY_REWARD
            ),
        )

    scenario = Scenario(
        name=root.str_("name", required=False, default="unnamed"),
        subnets=tuple(subnets),
        hosts=tuple(hosts),
        firewall_rules=rules,
        agents=agents,
        max_steps=root.int_("max_steps", required=False, default=DEFAULT_MAX_STEPS),
        goal=goal,
        rewards=rewards,
        images=images,
        action_catalog=_parse_actions_catalog(actions_text),
    )

    diagnostics = validate(scenario)
    for diag in diagnostics:
        if diag.code in ("UnknownImage", "UnknownSubnet", "UnknownGoalHost", "UnknownStartHost"):
            raise ScenarioReferenceError(diag.message, dangling_name=diag.subject)
    if diagnostics:
        raise ScenarioInvariantError(str(diagnostics[0]), field=diagnostics[0].code)
    return scenario


# ---------------------------------------------------------------------------
# Validation


def validate(scenario: Scenario) -> list[Diagnostic]:
    """Check every structural invariant; empty list means the scenario is clean."""
    out: list[Diagnostic] = []
    subnet_ids = set()
    for subnet in scenario.subnets:
        if subnet.id in subnet_ids:
            out.append(Diagnostic("DuplicateSubnetId", f"subnet id '{subnet.id}' appears twice", subnet.id))
        subnet_ids.add(subnet.id)
        if subnet.size < 1:
            out.append(Diagnostic("BadSubnetSize", f"subnet '{subnet.id}' has size {subnet.size}"))

    host_ids = set()
    hosts_per_subnet: dict[str, int] = {}
    for host in scenario.hosts:
        if host.id in host_ids:
            out.append(Diagnostic("DuplicateHostId", f"host id '{host.id}' appears twice", host.id))
        host_ids.add(host.id)
        if host.subnet_id not in subnet_ids:
            out.append(Diagnostic("UnknownSubnet", f"host '{host.id}' references subnet '{host.subnet_id}'", host.subnet_id))
        else:
            hosts_per_subnet[host.subnet_id] = hosts_per_subnet.get(host.subnet_id, 0) + 1
        if host.image not in scenario.images:
            out.append(Diagnostic("UnknownImage", f"host '{host.id}' references image '{host.image}'", host.image))

    for subnet in scenario.subnets:
        if hosts_per_subnet.get(subnet.id, 0) > subnet.size:
            out.append(
                Diagnostic(
                    "SubnetTooSmall",
                    f"subnet '{subnet.id}' has size {subnet.size} but "
                    f"{hosts_per_subnet[subnet.id]} hosts",
                )
            )

    for image in scenario.images.values():
        ports = set()
        for service in image.services:
            if service.port in ports:
                out.append(
                    Diagnostic(
                        "DuplicateServicePort",
                        f"image '{image.id}' lists port {service.port} twice",
                    )
                )
            ports.add(service.port)
        usernames = set()
        for user in image.users:
            if user.username in usernames:
                out.append(
                    Diagnostic(
                        "DuplicateUsername",
                        f"image '{image.id}' lists user '{user.username}' twice",
                    )
                )
            usernames.add(user.username)
            if len(user.groups) != len(user.gids):
                out.append(
                    Diagnostic(
                        "GroupsGidsMismatch",
                        f"image '{image.id}' user '{user.username}' has "
                        f"{len(user.groups)} groups and {len(user.gids)} gids",
                    )
                )
        pids = set()
        for proc in image.processes:
            if proc.pid in pids:
                out.append(
                    Diagnostic("DuplicatePid", f"image '{image.id}' lists pid {proc.pid} twice")
                )
            pids.add(proc.pid)
            if proc.pid < 1:
                out.append(
                    Diagnostic("BadPid", f"image '{image.id}' process pid {proc.pid} is < 1")
                )
            if proc.owner not in usernames:
                out.append(
                    Diagnostic(
                        "UnknownProcessOwner",
                        f"image '{image.id}' process '{proc.name}' owned by "
                        f"unknown user '{proc.owner}'",
                    )
                )
        for service in image.services:
            if service.credentials and service.credentials[0] not in usernames:
                out.append(
                    Diagnostic(
                        "UnknownCredentialUser",
                        f"image '{image.id}' service '{service.name}' credentials "
                        f"name unknown user '{service.credentials[0]}'",
                    )
                )

    for rule in scenario.firewall_rules:
        for side, sid in (("src", rule.src_subnet), ("dst", rule.dst_subnet)):
            if sid not in subnet_ids:
                out.append(
                    Diagnostic(
                        "UnknownFirewallSubnet",
                        f"firewall rule references unknown {side} subnet '{sid}'",
                    )
                )
        if rule.protocol == PROTO_TCP and rule.port is None:
            out.append(Diagnostic("MissingRulePort", "TCP firewall rule has no port"))
        if rule.protocol == PROTO_ICMP and rule.port is not None:
            out.append(Diagnostic("UnexpectedRulePort", "ICMP firewall rule carries a port"))

    catalog = scenario.action_catalog or {d.name: d for d in DEFAULT_CATALOG}
    agent_names = set()
    for agent in scenario.agents:
        if agent.name in agent_names:
            out.append(Diagnostic("DuplicateAgentName", f"agent '{agent.name}' appears twice"))
        agent_names.add(agent.name)
        if agent.team != "Red":
            out.append(Diagnostic("UnknownTeam", f"agent '{agent.name}' has team '{agent.team}'"))
        for action in agent.allowed_actions:
            if action not in catalog:
                out.append(
                    Diagnostic(
                        "UnknownAllowedAction",
                        f"agent '{agent.name}' allows unknown action '{action}'",
                    )
                )
        for sess in agent.starting_sessions:
            if sess.host not in host_ids:
                out.append(
                    Diagnostic(
                        "UnknownStartHost",
                        f"agent '{agent.name}' starts on unknown host '{sess.host}'",
                        sess.host,
                    )
                )
        for fact in agent.starting_knowledge:
            if fact.kind == "subnet_range" and fact.subnet not in subnet_ids:
                out.append(
                    Diagnostic(
                        "UnknownKnowledgeSubnet",
                        f"agent '{agent.name}' starting knowledge references "
                        f"unknown subnet '{fact.subnet}'",
                    )
                )
            if fact.kind == "host_ip" and fact.host not in host_ids:
                out.append(
                    Diagnostic(
                        "UnknownKnowledgeHost",
                        f"agent '{agent.name}' starting knowledge references "
                        f"unknown host '{fact.host}'",
                    )
                )

    if scenario.max_steps < 1:
        out.append(Diagnostic("BadMaxSteps", f"max_steps is {scenario.max_steps}, must be >= 1"))

    if scenario.goal is not None and scenario.goal.host not in host_ids:
        out.append(
            Diagnostic(
                "UnknownGoalHost",
                f"goal references unknown host '{scenario.goal.host}'",
                scenario.goal.host,
            )
        )

    r = scenario.rewards
    if not (r.goal_reward > r.user_session_reward > r.discovery_reward > 0):
        out.append(
            Diagnostic(
                "BadRewardOrder",
                "rewards must satisfy goal > user_session > discovery > 0",
            )
        )
    return out


# ---------------------------------------------------------------------------
# Serialization


def _dump(tree: object) -> str:
    return yaml.safe_dump(tree, default_flow_style=False, sort_keys=False, indent=2)


def _os_tree(os: OsInfo) -> dict:
    tree = {
        "os_type": os.os_type,
        "distribution": os.distribution,
        "version": os.version,
    }
    if os.patches:
        tree["patches"] = list(os.patches)
    tree["architecture"] = os.architecture
    return tree


def _image_tree(image: ImageSpec) -> dict:
    tree: dict = {"id": image.id, "os": _os_tree(image.os)}
    if image.deploy_id:
        tree["deploy_id"] = image.deploy_id
    if image.services:
        tree["services"] = []
        for svc in image.services:
            s: dict = {"name": svc.name, "port": svc.port}
            if svc.credentials:
                s["credentials"] = {
                    "username": svc.credentials[0],
                    "password": svc.credentials[1],
                }
            if svc.vulnerabilities:
                s["vulnerabilities"] = list(svc.vulnerabilities)
            tree["services"].append(s)
    if image.processes:
        tree["processes"] = []
        for proc in image.processes:
            p: dict = {"pid": proc.pid, "ppid": proc.ppid, "name": proc.name, "owner": proc.owner}
            if proc.connections:
                p["connections"] = [
                    {"local_port": port, "remote_address": addr} for port, addr in proc.connections
                ]
            tree["processes"].append(p)
    if image.users:
        tree["users"] = []
        for user in image.users:
            u: dict = {"username": user.username, "uid": user.uid}
            if user.groups:
                u["groups"] = list(user.groups)
            if user.gids:
                u["gids"] = list(user.gids)
            if user.password is not None:
                u["password"] = user.password
            if user.password_hash is not None:
                u["password_hash"] = user.password_hash
            if user.privileged:
                u["privileged"] = True
            tree["users"].append(u)
    return tree


def serialize_scenario(scenario: Scenario) -> tuple[str, str, str]:
    """Emit (scenario_text, images_text, actions_text) that reparse equal."""
    tree: dict = {"name": scenario.name}
    if scenario.subnets:
        tree["subnets"] = [{"id": s.id, "size": s.size} for s in scenario.subnets]
    if scenario.hosts:
        tree["hosts"] = [
            {"id": h.id, "image": h.image, "subnet": h.subnet_id} for h in scenario.hosts
        ]
    if scenario.firewall_rules:
        tree["firewall_rules"] = []
        for rule in scenario.firewall_rules:
            r: dict = {
                "src_subnet": rule.src_subnet,
                "dst_subnet": rule.dst_subnet,
                "protocol": rule.protocol,
            }
            if rule.port is not None:
                r["port"] = rule.port
            r["allow"] = rule.allow
            tree["firewall_rules"].append(r)
    if scenario.agents:
        tree["agents"] = []
        for agent in scenario.agents:
            a: dict = {"name": agent.name, "team": agent.team}
            if agent.allowed_actions:
                a["allowed_actions"] = list(agent.allowed_actions)
            if agent.starting_sessions:
                a["starting_sessions"] = []
                for sess in agent.starting_sessions:
                    s = {"host": sess.host, "privilege": sess.privilege}
                    if sess.username:
                        s["username"] = sess.username
                    a["starting_sessions"].append(s)
            if agent.starting_knowledge:
                a["starting_knowledge"] = []
                for fact in agent.starting_knowledge:
                    f: dict = {"kind": fact.kind}
                    if fact.subnet is not None:
                        f["subnet"] = fact.subnet
                    if fact.host is not None:
                        f["host"] = fact.host
                    a["starting_knowledge"].append(f)
            tree["agents"].append(a)
    tree["max_steps"] = scenario.max_steps
    if scenario.goal is not None:
        tree["goal"] = {
            "kind": scenario.goal.kind,
            "host": scenario.goal.host,
            "privilege": scenario.goal.privilege,
        }
    tree["rewards"] = {
        "goal_reward": scenario.rewards.goal_reward,
        "user_session_reward": scenario.rewards.user_session_reward,
        "discovery_reward": scenario.rewards.discovery_reward,
    }

    images_tree = {"images": [_image_tree(img) for img in scenario.images.values()]}

    catalog = scenario.action_catalog or {d.name: d for d in DEFAULT_CATALOG}
    actions_tree = {
        "actions": [
            {"name": d.name, "params": list(d.params), "requires_framework": d.framework}
            for d in catalog.values()
        ]
    }
    return _dump(tree), _dump(images_tree), _dump(actions_tree)


# ---------------------------------------------------------------------------
# Built-in scenario


def _builtin_text(name: str) -> str:
    return (resources.files("redsim.data.builtin") / name).read_text(encoding="utf-8")


def builtin_killchain_scenario() -> Scenario:
    """Load the built-in two-subnet killchain scenario from its data files."""
    return parse_scenario(
        _builtin_text("scenario.yaml"),
        _builtin_text("images.yaml"),
        _builtin_text("actions.yaml"),
    )
