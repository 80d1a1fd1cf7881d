"""Scenario parsing, validation, serialization round-trips, builtin facts."""

import dataclasses

import pytest

from redsim.errors import (
    ScenarioInvariantError,
    ScenarioReferenceError,
    ScenarioSyntaxError,
)
from redsim.scenario import (
    GoalSpec,
    builtin_killchain_scenario,
    parse_scenario,
    serialize_scenario,
    validate,
)

from .helpers import EMPTY_IMAGES_TEXT, EMPTY_SCENARIO_TEXT


class TestBuiltinScenario:
    def test_three_hosts_two_subnets(self, builtin):
        assert len(builtin.hosts) == 3
        assert len(builtin.subnets) == 2

    def test_gateway_credentials(self, builtin):
        gateway = builtin.images["gateway_box"]
        ssh = next(s for s in gateway.services if s.port == 22)
        assert ssh.credentials == ("pi", "raspberry")

    def test_internal_credentials(self, builtin):
        internal = builtin.images["internal_box"]
        ssh = next(s for s in internal.services if s.port == 22)
        assert ssh.credentials == ("vagrant", "vagrant")

    def test_internal_smb_vulnerability(self, builtin):
        internal = builtin.images["internal_box"]
        smb = next(s for s in internal.services if s.port == 445)
        assert "MS17-010" in smb.vulnerabilities

    def test_goal_is_system_session_on_internal(self, builtin):
        assert builtin.goal == GoalSpec("PrivilegedSessionOn", "internal", "System")

    def test_max_steps_twenty(self, builtin):
        assert builtin.max_steps == 20

    def test_eight_action_set(self, builtin):
        agent = builtin.agents[0]
        assert sorted(agent.allowed_actions) == sorted(
            [
                "Sleep",
                "IPConfig",
                "Pingsweep",
                "Portscan",
                "SSHBruteforce",
                "UpgradeToMeterpreter",
                "Autoroute",
                "MS17-010-PSExec",
            ]
        )

    def test_firewall_allows_icmp_and_ssh_blocks_smb(self, builtin):
        rules = {
            (r.protocol, r.port): r.allow
            for r in builtin.firewall_rules
            if r.src_subnet == "attacker_subnet" and r.dst_subnet == "internal_subnet"
        }
        assert rules[("ICMP", None)] is True
        assert rules[("TCP", 22)] is True
        assert rules[("TCP", 445)] is False

    def test_builtin_validates_clean(self, builtin):
        assert validate(builtin) == []

    def test_reward_ordering(self, builtin):
        r = builtin.rewards
        assert r.goal_reward > r.user_session_reward > r.discovery_reward > 0


class TestParsing:
    def test_empty_scenario_is_valid(self):
        scenario = parse_scenario(EMPTY_SCENARIO_TEXT, EMPTY_IMAGES_TEXT)
        assert scenario.hosts == ()
        assert scenario.agents == ()
        assert scenario.goal is None
        assert validate(scenario) == []

    def test_parse_is_pure(self, builtin):
        again = builtin_killchain_scenario()
        assert again == builtin

    def test_missing_image_reference(self):
        text = EMPTY_SCENARIO_TEXT + (
            "subnets:\n  - id: net\n    size: 4\n"
            "hosts:\n  - id: box\n    image: missing\n    subnet: net\n"
        )
        with pytest.raises(ScenarioReferenceError) as err:
            parse_scenario(text, EMPTY_IMAGES_TEXT)
        assert err.value.dangling_name == "missing"

    def test_syntax_error_reports_line_and_column(self):
        with pytest.raises(ScenarioSyntaxError) as err:
            parse_scenario("name: ok\n  broken:\n    - [\n", EMPTY_IMAGES_TEXT)
        assert err.value.line is not None

    def test_anchors_rejected(self):
        text = "name: &anchor base\nmax_steps: 5\n"
        with pytest.raises(ScenarioSyntaxError):
            parse_scenario(text, EMPTY_IMAGES_TEXT)

    def test_aliases_rejected(self):
        text = "name: &a base\nother: *a\n"
        with pytest.raises(ScenarioSyntaxError):
            parse_scenario(text, EMPTY_IMAGES_TEXT)

    def test_tags_rejected(self):
        text = "name: !!python/none\n"
        with pytest.raises(ScenarioSyntaxError):
            parse_scenario(text, EMPTY_IMAGES_TEXT)

    def test_bad_protocol_rejected(self):
        text = EMPTY_SCENARIO_TEXT + (
            "subnets:\n  - id: a\n    size: 2\n  - id: b\n    size: 2\n"
            "firewall_rules:\n"
            "  - src_subnet: a\n    dst_subnet: b\n    protocol: UDP\n    allow: true\n"
        )
        with pytest.raises(ScenarioInvariantError):
            parse_scenario(text, EMPTY_IMAGES_TEXT)

    def test_tcp_rule_requires_port(self):
        text = EMPTY_SCENARIO_TEXT + (
            "subnets:\n  - id: a\n    size: 2\n  - id: b\n    size: 2\n"
            "firewall_rules:\n"
            "  - src_subnet: a\n    dst_subnet: b\n    protocol: TCP\n    allow: true\n"
        )
        with pytest.raises(ScenarioInvariantError):
            parse_scenario(text, EMPTY_IMAGES_TEXT)

    def test_defaults_applied(self):
        scenario = parse_scenario("name: defaults\n", EMPTY_IMAGES_TEXT)
        assert scenario.max_steps == 20
        assert scenario.rewards.goal_reward == 10.0
        assert scenario.rewards.user_session_reward == 3.0
        assert scenario.rewards.discovery_reward == 0.1

    def test_actions_file_restricts_catalog(self):
        actions = "actions:\n  - name: Sleep\n  - name: IPConfig\n"
        scenario = parse_scenario(EMPTY_SCENARIO_TEXT, EMPTY_IMAGES_TEXT, actions)
        assert sorted(scenario.action_catalog) == ["IPConfig", "Sleep"]

    def test_actions_file_reparameterizes(self):
        actions = (
            "actions:\n"
            "  - name: Portscan\n"
            "    params:\n"
            "      - session\n"
            "      - target_ip\n"
            "    requires_framework: false\n"
        )
        scenario = parse_scenario(EMPTY_SCENARIO_TEXT, EMPTY_IMAGES_TEXT, actions)
        assert scenario.action_catalog["Portscan"].framework is False


class TestRoundTrip:
    def test_builtin_round_trips(self, builtin):
        scenario_text, images_text, actions_text = serialize_scenario(builtin)
        reparsed = parse_scenario(scenario_text, images_text, actions_text)
        assert reparsed == builtin

    def test_empty_round_trips(self):
        scenario = parse_scenario(EMPTY_SCENARIO_TEXT, EMPTY_IMAGES_TEXT)
        texts = serialize_scenario(scenario)
        assert parse_scenario(*texts) == scenario

    def test_serialize_is_stable(self, builtin):
        assert serialize_scenario(builtin) == serialize_scenario(builtin)


class TestValidateDiagnostics:
    def test_duplicate_host_id(self, builtin):
        doubled = dataclasses.replace(builtin, hosts=builtin.hosts + (builtin.hosts[1],))
        codes = [d.code for d in validate(doubled)]
        assert "DuplicateHostId" in codes
        message = next(str(d) for d in validate(doubled) if d.code == "DuplicateHostId")
        assert "gateway" in message

    def test_unknown_goal_host(self, builtin):
        bad = dataclasses.replace(builtin, goal=GoalSpec("PrivilegedSessionOn", "nope", "System"))
        assert "UnknownGoalHost" in [d.code for d in validate(bad)]

    def test_subnet_too_small(self, builtin):
        small = dataclasses.replace(
            builtin,
            subnets=(builtin.subnets[0], dataclasses.replace(builtin.subnets[1], size=1)),
        )
        assert "SubnetTooSmall" in [d.code for d in validate(small)]

    def test_bad_max_steps(self, builtin):
        bad = dataclasses.replace(builtin, max_steps=0)
        assert "BadMaxSteps" in [d.code for d in validate(bad)]

    def test_bad_reward_order(self, builtin):
        bad = dataclasses.replace(
            builtin, rewards=dataclasses.replace(builtin.rewards, goal_reward=0.01)
        )
        assert "BadRewardOrder" in [d.code for d in validate(bad)]

    def test_unknown_allowed_action(self, builtin):
        agent = dataclasses.replace(
            builtin.agents[0], allowed_actions=builtin.agents[0].allowed_actions + ("Fly",)
        )
        bad = dataclasses.replace(builtin, agents=(agent,))
        assert "UnknownAllowedAction" in [d.code for d in validate(bad)]
