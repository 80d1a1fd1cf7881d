"""Episode loop: rewards, termination, backend equivalences, logging."""

import json

import pytest

from redsim.actions import Action, ActionParams, SUCCESS_TRUE, sleep_action
from redsim.agents import RandomPolicy, ScriptedKillchain, rollout
from redsim.engine import (
    Environment,
    FLAWED_SIM,
    REFERENCE_SIM,
    backend_by_name,
    emu_proxy,
    reset,
    run_episode,
)
from redsim.errors import StepAfterDoneError
from redsim.scenario import parse_scenario
from redsim.wrappers import FlatWrapper

from .helpers import EMPTY_IMAGES_TEXT, EMPTY_SCENARIO_TEXT, canonical_env


class TestBackends:
    def test_backend_registry(self):
        assert backend_by_name("sim").failure_prob == 0.0
        assert backend_by_name("sim").flawed_routing is False
        assert backend_by_name("flawed-sim").flawed_routing is True
        assert backend_by_name("flawed-sim").failure_prob == 0.0
        assert backend_by_name("emu-proxy").failure_prob == 0.05
        assert backend_by_name("emu-proxy", 0.2).failure_prob == 0.2
        assert backend_by_name("emu-proxy").flawed_routing is False

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            backend_by_name("cloud")


class TestReset:
    def test_reset_same_seed_identical_observation(self, builtin):
        from redsim.observation import serialize_observation

        _env1, obs1 = reset(builtin, REFERENCE_SIM, 7)
        _env2, obs2 = reset(builtin, REFERENCE_SIM, 7)
        assert serialize_observation(obs1) == serialize_observation(obs2)

    def test_reset_different_seed_same_keys_other_values(self, builtin):
        env1, _ = reset(builtin, REFERENCE_SIM, 7)
        env2, _ = reset(builtin, REFERENCE_SIM, 8)
        ips1 = {h: s.interface().ip for h, s in env1.world.hosts.items()}
        ips2 = {h: s.interface().ip for h, s in env2.world.hosts.items()}
        assert set(ips1) == set(ips2)
        assert ips1 != ips2

    def test_reset_mid_episode_zeroes_counters(self, builtin):
        env, _ = reset(builtin, REFERENCE_SIM, 7)
        env.step(sleep_action())
        env.step(sleep_action())
        assert env.world.step == 2
        env.reset(7)
        assert env.world.step == 0
        assert env.done is False
        assert len(env.world.sessions) == 1


class TestStep:
    def test_sleep_earns_nothing(self, builtin):
        env, _ = reset(builtin, REFERENCE_SIM, 1)
        result = env.step(sleep_action())
        assert result.reward == 0.0
        assert result.done is False
        assert result.info == {"step": 1, "goal_reached": False, "backend": "sim"}

    def test_twenty_sleeps_time_out(self, builtin):
        env, _ = reset(builtin, REFERENCE_SIM, 1)
        for i in range(20):
            result = env.step(sleep_action())
        assert result.done is True
        assert result.info["step"] == 20
        assert result.info["goal_reached"] is False

    def test_step_after_done_raises(self, builtin):
        env, _ = reset(builtin, REFERENCE_SIM, 1)
        for _ in range(20):
            env.step(sleep_action())
        with pytest.raises(StepAfterDoneError):
            env.step(sleep_action())

    def test_goal_step_rewards_and_terminates(self, builtin):
        env, wrapper, log = canonical_env(builtin)
        assert log.goal_step == 7
        final = log.steps[-1]
        # goal reward plus three discovery facts (session, os, user)
        assert final.reward == pytest.approx(10.3)
        assert env.done is True
        assert env.goal_reached is True

    def test_canonical_reward_sequence(self, builtin):
        # Hand-derived from the reward spec: discovery 0.1/fact, user
        # session 3.0, goal 10.0. Fact counts per step:
        #   sweep: swept + 2 interfaces            -> 0.3
        #   scan gw: port 22                       -> 0.1
        #   brute: session + os + user + credential -> 3.4
        #   upgrade: session kind                  -> 0.1
        #   autoroute: route                       -> 0.1
        #   scan internal: ports 22 and 445        -> 0.2
        #   psexec: session + os + user            -> 10.3
        _env, _wrapper, log = canonical_env(builtin)
        assert [pytest.approx(r.reward) for r in log.steps] == [
            0.3, 0.1, 3.4, 0.1, 0.1, 0.2, 10.3,
        ]
        assert log.total_reward == pytest.approx(14.5)


class TestRewardAccounting:
    def test_goal_reward_granted_once(self, builtin):
        # Replay the canonical plan but keep the episode going by stripping
        # the goal, then re-add: simpler: verify via log (goal ends episode).
        _env, _wrapper, log = canonical_env(builtin)
        goal_rewards = [r.reward for r in log.steps if r.reward >= 10.0]
        assert len(goal_rewards) == 1

    def test_user_session_reward_once_per_host(self, builtin):
        env, _wrapper, _log = canonical_env(builtin, steps=3)  # bruteforce done
        red = env.knowledge("red")
        ip = env.world.hosts["internal"].interface().ip
        result = env.step(Action("SSHBruteforce", ActionParams(session=0, target_ip=ip)))
        # internal: first session -> user reward applies (port 22 known? no!)
        # Port 22 of internal is unknown at step 3, so this fails instead.
        assert result.reward == 0.0
        # Scan internal first, then bruteforce pays the one-time bonus.
        env.step(Action("Portscan", ActionParams(session=0, target_ip=ip)))
        result = env.step(Action("SSHBruteforce", ActionParams(session=0, target_ip=ip)))
        assert result.reward == pytest.approx(3.4)
        # A second session on the same host can never pay again: the
        # bruteforce repeat is a no-op failure.
        result = env.step(Action("SSHBruteforce", ActionParams(session=0, target_ip=ip)))
        assert result.reward == 0.0

    def test_replay_reproduces_rewards(self, builtin):
        _env, _wrapper, log = canonical_env(builtin, seed=5)
        env2 = Environment(builtin, REFERENCE_SIM, 5)
        rewards = []
        for record in log.steps:
            rewards.append(env2.step(record.action).reward)
        assert rewards == [r.reward for r in log.steps]


class TestRunEpisode:
    def test_scripted_killchain_goal_at_seven(self, builtin):
        _env, _wrapper, log = canonical_env(builtin, seed=3)
        assert log.goal_step == 7
        assert len(log.steps) == 7

    def test_random_policy_respects_cap(self, builtin):
        wrapper = FlatWrapper(builtin)
        env = Environment(builtin, REFERENCE_SIM, 3)
        log = rollout(env, wrapper, RandomPolicy(wrapper, 3), step_cap=20)
        assert len(log.steps) <= 20

    def test_engine_level_driver_with_raw_policy(self, builtin):
        env, _obs = reset(builtin, REFERENCE_SIM, 1)
        log = run_episode(env, lambda obs: sleep_action(), step_cap=5)
        assert len(log.steps) == 5
        assert log.goal_step is None

    def test_killchain_without_autoroute_never_reaches_goal(self, builtin):
        # Same scripted chain minus the Autoroute step.
        wrapper = FlatWrapper(builtin)
        policy = ScriptedKillchain(wrapper)
        policy.sequence = policy.sequence[:4] + policy.sequence[5:]
        env = Environment(builtin, REFERENCE_SIM, 1)
        log = rollout(env, wrapper, policy)
        assert log.goal_step is None
        assert len(log.steps) == 20


class TestBackendEquivalence:
    def test_emu_proxy_p0_trajectory_identical_to_sim(self, builtin):
        wrapper = FlatWrapper(builtin)
        for seed in range(20):
            sim_env = Environment(builtin, REFERENCE_SIM, seed)
            emu_env = Environment(builtin, emu_proxy(0.0), seed)
            sim_log = rollout(sim_env, wrapper, RandomPolicy(wrapper, seed))
            emu_log = rollout(emu_env, wrapper, RandomPolicy(wrapper, seed))
            sim_tree = sim_log.to_tree()
            emu_tree = emu_log.to_tree()
            sim_tree["backend"] = emu_tree["backend"] = "-"
            assert sim_tree == emu_tree

    def test_flawed_and_reference_diverge_only_on_unrouted_psexec(self, builtin):
        """Replay identical random action streams through both backends and
        compare step by step; any divergence must be an MS17-010-PSExec
        whose strict-mode failure was a missing route/port observation."""
        wrapper = FlatWrapper(builtin)
        divergences = 0
        for seed in range(40):
            ref_env = Environment(builtin, REFERENCE_SIM, seed)
            flw_env = Environment(builtin, FLAWED_SIM, seed)
            policy = RandomPolicy(wrapper, seed)
            ref_know = ref_env.knowledge("red")
            success = ref_env.initial_observation("red").success
            while not ref_env.done and not flw_env.done:
                flat = wrapper.flatten(success, ref_know)
                encoded = policy.act(flat, wrapper.mask(ref_know))
                action = wrapper.decode(encoded, ref_know)
                ref_res = ref_env.step(action)
                flw_res = flw_env.step(action)
                success = ref_res.observation.success
                if ref_res.observation.success != flw_res.observation.success:
                    divergences += 1
                    assert action.name == "MS17-010-PSExec"
                    assert ref_res.observation.success == "False"
                    assert flw_res.observation.success == SUCCESS_TRUE
                    break  # worlds now differ; stop comparing this stream
        assert divergences > 0  # the property was actually exercised


class TestEpisodeLogSerialization:
    def test_jsonl_schema(self, builtin):
        _env, _wrapper, log = canonical_env(builtin, seed=2)
        line = log.to_json_line()
        tree = json.loads(line)
        assert set(tree) == {"seed", "backend", "steps", "total_reward", "goal_step"}
        assert tree["seed"] == 2
        assert tree["backend"] == "sim"
        assert tree["goal_step"] == 7
        assert len(tree["steps"]) == 7
        first = tree["steps"][0]
        assert set(first) == {"action", "success", "reward"}
        assert first["action"]["name"] == "Pingsweep"

    def test_total_reward_equals_sum(self, builtin):
        wrapper = FlatWrapper(builtin)
        for seed in range(5):
            env = Environment(builtin, REFERENCE_SIM, seed)
            log = rollout(env, wrapper, RandomPolicy(wrapper, seed))
            assert log.total_reward == pytest.approx(sum(r.reward for r in log.steps))


class TestDegenerateScenario:
    def test_zero_hosts_zero_agents_playable(self):
        scenario = parse_scenario(EMPTY_SCENARIO_TEXT, EMPTY_IMAGES_TEXT)
        env = Environment(scenario, REFERENCE_SIM, 1)
        assert env.agent_names() == []
        for _ in range(5):
            results = env.step_all({})
        assert env.done is True
        assert results == {}

    def test_single_agent_step_requires_one_agent(self):
        scenario = parse_scenario(EMPTY_SCENARIO_TEXT, EMPTY_IMAGES_TEXT)
        env = Environment(scenario, REFERENCE_SIM, 1)
        with pytest.raises(ValueError):
            env.step(sleep_action())
