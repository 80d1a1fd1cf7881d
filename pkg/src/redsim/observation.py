"""Per-agent observations, assembled from the agent's knowledge alone.

An observation is the action success flag plus one section per host the
agent holds at least one fact about, split into the Interface / Session /
User / System / Process categories. Ground truth is never consulted, so
nothing an agent has not observed can leak into its view. Categories with
no facts are omitted from the serialized form rather than emitted empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .world import AgentKnowledge


@dataclass(frozen=True)
class HostObservation:
    interface: tuple[str, str] | None = None  # (ip, subnet id)
    sessions: tuple[tuple[int, str, str], ...] = ()  # (id, kind, privilege)
    users: tuple[tuple[str, int], ...] = ()  # (username, uid)
    system: str | None = None  # OS summary
    processes: tuple[tuple[int, str, str], ...] = ()  # (pid, name, owner)


@dataclass(frozen=True)
class Observation:
    success: str
    hosts: dict[str, HostObservation] = field(default_factory=dict)

    def to_tree(self) -> dict:
        hosts_tree = {}
        for host_id in sorted(self.hosts):
            section: dict = {}
            obs = self.hosts[host_id]
            if obs.interface is not None:
                section["interface"] = {"ip": obs.interface[0], "subnet": obs.interface[1]}
            if obs.sessions:
                section["sessions"] = [
                    {"id": sid, "kind": kind, "privilege": priv}
                    for sid, kind, priv in obs.sessions
                ]
            if obs.users:
                section["users"] = [{"username": name, "uid": uid} for name, uid in obs.users]
            if obs.system is not None:
                section["system"] = obs.system
            if obs.processes:
                section["processes"] = [
                    {"pid": pid, "name": name, "owner": owner}
                    for pid, name, owner in obs.processes
                ]
            hosts_tree[host_id] = section
        return {"success": self.success, "hosts": hosts_tree}


def build_observation(success: str, knowledge: AgentKnowledge) -> Observation:
    """Project the agent's cumulative knowledge into an observation."""
    hosts: dict[str, HostObservation] = {}
    for host_id in sorted(knowledge.hosts_known()):
        sessions = tuple(
            (fact.id, fact.kind, fact.privilege)
            for fact in sorted(knowledge.sessions.values(), key=lambda f: f.id)
            if fact.host == host_id
        )
        users = tuple(
            (username, uid)
            for host, username, uid in sorted(knowledge.known_users)
            if host == host_id
        )
        hosts[host_id] = HostObservation(
            interface=knowledge.interfaces.get(host_id),
            sessions=sessions,
            users=users,
            system=knowledge.known_os.get(host_id),
        )
    return Observation(success=success, hosts=hosts)


def serialize_observation(observation: Observation) -> str:
    """Canonical text form (same grammar as the scenario files)."""
    return yaml.safe_dump(observation.to_tree(), default_flow_style=False, sort_keys=True, indent=2)
