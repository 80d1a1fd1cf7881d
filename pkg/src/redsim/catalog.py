"""The red-agent action catalog: names and parameter schemas.

The default catalog is the eight-action set used by the built-in scenario.
A scenario bundle may override it through an actions file (see
``docs/file-formats.md``): actions can be removed, or their parameter list
and launcher requirement changed.

``framework`` marks the actions that are modules of the attack framework
(scanners, bruteforcers, exploits). They can only be launched from a
session on a host that runs the framework server process; sessions gained
on other hosts are plain footholds and support only session-local actions
(IPConfig, UpgradeToMeterpreter, Autoroute).
"""

from __future__ import annotations

from dataclasses import dataclass

# Head names, in the order the action wrapper encodes them.
PARAM_SESSION = "session"
PARAM_TARGET_IP = "target_ip"
PARAM_TARGET_SUBNET = "target_subnet"

# Process names that mark a host as an attack-framework launcher.
FRAMEWORK_PROCESS_NAMES = frozenset({"msfrpcd"})

SLEEP = "Sleep"
IPCONFIG = "IPConfig"
PINGSWEEP = "Pingsweep"
PORTSCAN = "Portscan"
SSH_BRUTEFORCE = "SSHBruteforce"
UPGRADE_TO_METERPRETER = "UpgradeToMeterpreter"
AUTOROUTE = "Autoroute"
MS17_010_PSEXEC = "MS17-010-PSExec"


@dataclass(frozen=True)
class ActionDef:
    """Schema of one catalog action."""

    name: str
    params: tuple[str, ...]
    framework: bool = False


DEFAULT_CATALOG: tuple[ActionDef, ...] = (
    ActionDef(SLEEP, ()),
    ActionDef(IPCONFIG, (PARAM_SESSION,)),
    ActionDef(PINGSWEEP, (PARAM_SESSION, PARAM_TARGET_SUBNET), framework=True),
    ActionDef(PORTSCAN, (PARAM_SESSION, PARAM_TARGET_IP), framework=True),
    ActionDef(SSH_BRUTEFORCE, (PARAM_SESSION, PARAM_TARGET_IP), framework=True),
    ActionDef(UPGRADE_TO_METERPRETER, (PARAM_SESSION,)),
    ActionDef(AUTOROUTE, (PARAM_SESSION, PARAM_TARGET_SUBNET)),
    ActionDef(MS17_010_PSEXEC, (PARAM_SESSION, PARAM_TARGET_IP), framework=True),
)

DEFAULT_CATALOG_BY_NAME: dict[str, ActionDef] = {d.name: d for d in DEFAULT_CATALOG}

_VALID_PARAMS = (PARAM_SESSION, PARAM_TARGET_IP, PARAM_TARGET_SUBNET)


def action_schema(name: str, catalog: dict[str, ActionDef] | None = None) -> tuple[str, ...]:
    """Return the parameter schema for ``name``.

    Raises KeyError for an unknown action name.
    """
    defs = catalog if catalog is not None else DEFAULT_CATALOG_BY_NAME
    return defs[name].params


def validate_catalog(defs: dict[str, ActionDef]) -> None:
    """Reject catalogs with unknown parameter names or duplicate actions."""
    for d in defs.values():
        for p in d.params:
            if p not in _VALID_PARAMS:
                raise ValueError(f"action {d.name!r} declares unknown parameter {p!r}")
