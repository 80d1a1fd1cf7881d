"""Command-line interface: validate, plan, run, train, eval, transfer, layout.

Every command honors --seed and writes machine-readable outputs (JSON,
JSON lines, CSV) plus rendered figures where a report has one; repeated
invocations with equal arguments produce byte-identical data files.
Wall-clock metadata goes to a separate run_meta.json that is excluded
from that guarantee.

Exit codes: 0 success, 1 domain error (failed validation, dangling
references), 2 usage or file-syntax error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
import time
from pathlib import Path

from .agents import (
    FactoredQPolicy,
    RandomPolicy,
    ScriptedKillchain,
    TrainConfig,
    evaluate,
    load_policy,
    policy_doc,
    rollout,
    train_q,
)
from .engine import Backend, Environment, backend_by_name
from .errors import RedsimError, ScenarioSyntaxError
from .planner import shortest_plan
from .report import save_success_histogram, save_training_curve
from .scenario import Scenario, builtin_killchain_scenario, parse_scenario, validate
from .wrappers import FlatWrapper

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def load_scenario(ref: str) -> Scenario:
    """Load `builtin` or a scenario bundle from disk.

    A bundle is either a directory holding scenario.yaml / images.yaml
    (plus optional actions.yaml), or the scenario file itself with the
    other files as siblings.
    """
    if ref == "builtin":
        return builtin_killchain_scenario()
    path = Path(ref)
    if path.is_dir():
        scenario_file = path / "scenario.yaml"
        base = path
    else:
        scenario_file = path
        base = path.parent
    if not scenario_file.exists():
        raise FileNotFoundError(f"scenario file not found: {scenario_file}")
    images_file = base / "images.yaml"
    if not images_file.exists():
        raise FileNotFoundError(f"images file not found: {images_file}")
    actions_file = base / "actions.yaml"
    actions_text = actions_file.read_text(encoding="utf-8") if actions_file.exists() else None
    return parse_scenario(
        scenario_file.read_text(encoding="utf-8"),
        images_file.read_text(encoding="utf-8"),
        actions_text,
    )


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, tree) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(tree, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _write_meta(out: Path | None, args) -> None:
    # Timestamps live here and only here.
    if out is None:
        return
    meta = {"command": sys.argv[1:] if sys.argv[1:] else [], "finished_at": time.time()}
    with open(out / "run_meta.json", "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2)
        handle.write("\n")


def _backend(args) -> Backend:
    failure_prob = getattr(args, "failure_prob", None)
    return backend_by_name(args.backend, failure_prob)


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioSyntaxError as exc:
        print(f"syntax error: {exc}")
        return EXIT_USAGE
    except (RedsimError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}")
        return EXIT_DOMAIN
    diagnostics = validate(scenario)
    for diag in diagnostics:
        print(diag)
    if diagnostics:
        print(f"{len(diagnostics)} problem(s) found")
        return EXIT_DOMAIN
    print(f"scenario '{scenario.name}' is valid "
          f"({len(scenario.hosts)} hosts, {len(scenario.subnets)} subnets)")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    backend = _backend(args)
    result = shortest_plan(scenario, backend, args.seed, node_budget=args.node_budget)
    tree = {
        "scenario": scenario.name,
        "backend": backend.name,
        "seed": args.seed,
        "nodes_expanded": result.nodes_expanded,
        "budget_exhausted": result.budget_exhausted,
        "plan": result.plan.to_tree() if result.plan else None,
    }
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "plan.json", tree)
        _write_meta(out, args)
    if result.budget_exhausted:
        print(f"no plan: node budget exhausted after {result.nodes_expanded} nodes")
        return EXIT_DOMAIN
    if result.plan is None:
        print("no plan reaches the goal within the step limit")
        return EXIT_DOMAIN
    print(f"shortest plan on backend '{backend.name}': {result.plan.length} steps")
    for i, action in enumerate(result.plan.actions, 1):
        params = action.to_tree()["params"]
        rendered = ", ".join(f"{k}={v}" for k, v in params.items())
        print(f"  {i}. {action.name}({rendered})")
    return EXIT_OK


def _make_policy(name: str, wrapper: FlatWrapper, seed: int, policy_file: str | None):
    if name == "scripted":
        return ScriptedKillchain(wrapper)
    if name == "random":
        return RandomPolicy(wrapper, seed)
    if name == "greedy":
        if policy_file is None:
            raise ValueError("--policy greedy requires --policy-file")
        return load_policy(policy_file, wrapper)
    raise ValueError(f"unknown policy {name!r}")


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    backend = _backend(args)
    wrapper = FlatWrapper(scenario)
    policy = _make_policy(args.policy, wrapper, args.seed, args.policy_file)
    env = Environment(scenario, backend, args.seed)
    policy.begin_episode(args.seed)
    log = rollout(env, wrapper, policy)
    out = _out_dir(args)
    if out is not None:
        with open(out / "episode.jsonl", "w", encoding="utf-8") as handle:
            handle.write(log.to_json_line())
            handle.write("\n")
        _write_meta(out, args)
    goal = f"goal at step {log.goal_step}" if log.goal_step else "goal not reached"
    print(f"{args.policy} on '{backend.name}': {len(log.steps)} steps, "
          f"total reward {log.total_reward:.2f}, {goal}")
    for i, rec in enumerate(log.steps, 1):
        params = rec.action.to_tree()["params"]
        rendered = ", ".join(f"{k}={v}" for k, v in params.items())
        print(f"  {i}. {rec.action.name}({rendered}) -> {rec.success} ({rec.reward:+.1f})")
    return EXIT_OK


def _train_one(payload) -> dict:
    scenario, backend, config = payload
    def factory(seed: int) -> Environment:
        return Environment(scenario, backend, seed)
    policy, report = train_q(factory, config)
    return {
        "seed": config.seed,
        "success": report.success,
        "iterations_used": report.iterations_used,
        "final_goal_step": report.final_goal_step,
        "returns": report.returns,
        "policy": policy_doc(policy),
    }


def _run_parallel(worker, payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [worker(p) for p in payloads]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, payloads))


def cmd_train(args) -> int:
    scenario = load_scenario(args.scenario)
    backend = _backend(args)
    configs = [
        TrainConfig(max_iterations=args.iterations, seed=args.seed + i)
        for i in range(args.agents)
    ]
    results = _run_parallel(_train_one, [(scenario, backend, c) for c in configs], args.workers)
    out = _out_dir(args)
    converged = 0
    summary = []
    for i, res in enumerate(results):
        converged += 1 if res["success"] else 0
        summary.append({k: res[k] for k in ("seed", "success", "iterations_used", "final_goal_step")})
        print(f"agent {i} (seed {res['seed']}): "
              f"{'converged' if res['success'] else 'did not converge'} "
              f"after {res['iterations_used']} iterations, "
              f"greedy goal step {res['final_goal_step']}")
        if out is not None:
            _write_json(out / f"policy_agent{i:02d}.json", res["policy"])
            save_training_curve(
                res["returns"],
                out / f"training_curve_agent{i:02d}.png",
                res["iterations_used"] if res["success"] else None,
            )
    if out is not None:
        _write_json(
            out / "train_report.json",
            {
                "backend": backend.name,
                "iterations_cap": args.iterations,
                "agents": summary,
                "converged": converged,
            },
        )
        with open(out / "returns.csv", "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["agent", "iteration", "episode_return"])
            for i, res in enumerate(results):
                for j, value in enumerate(res["returns"], 1):
                    writer.writerow([i, j, value])
        _write_meta(out, args)
    print(f"{converged}/{len(results)} agents converged")
    return EXIT_OK


def cmd_eval(args) -> int:
    scenario = load_scenario(args.scenario)
    backend = _backend(args)
    wrapper = FlatWrapper(scenario)
    policy = _make_policy(args.policy, wrapper, args.seed, args.policy_file)

    def factory(seed: int) -> Environment:
        return Environment(scenario, backend, seed)

    result = evaluate(policy, factory, args.episodes, base_seed=args.seed, wrapper=wrapper)
    tree = {
        "backend": backend.name,
        "policy": args.policy,
        "episodes": args.episodes,
        "seed": args.seed,
        "successes": result.successes,
        "goal_steps": result.goal_steps,
    }
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "eval_report.json", tree)
        with open(out / "episodes.jsonl", "w", encoding="utf-8") as handle:
            for log in result.logs:
                handle.write(log.to_json_line())
                handle.write("\n")
        _write_meta(out, args)
    print(f"{args.policy} on '{backend.name}': {result.successes}/{args.episodes} successes; "
          f"goal steps {result.goal_steps}")
    return EXIT_OK


def _transfer_one(payload) -> dict:
    scenario, train_backend, eval_backend, config, evals, eval_seed = payload
    def train_factory(seed: int) -> Environment:
        return Environment(scenario, train_backend, seed)
    def eval_factory(seed: int) -> Environment:
        return Environment(scenario, eval_backend, seed)
    policy, report = train_q(train_factory, config)
    wrapper = FlatWrapper(scenario)
    result = evaluate(policy, eval_factory, evals, base_seed=eval_seed, wrapper=wrapper)
    return {
        "train_seed": config.seed,
        "train_success": report.success,
        "train_iterations": report.iterations_used,
        "eval_successes": result.successes,
        "goal_steps": result.goal_steps,
        "policy": policy_doc(policy),
    }


def cmd_transfer(args) -> int:
    scenario = load_scenario(args.scenario)
    train_backend = backend_by_name(args.train_backend, args.failure_prob)
    eval_backend = backend_by_name(args.eval_backend, args.failure_prob)
    payloads = []
    for i in range(args.agents):
        config = TrainConfig(max_iterations=args.iterations, seed=args.seed + i)
        eval_seed = (args.seed + i) * 10_000 + 777
        payloads.append((scenario, train_backend, eval_backend, config, args.episodes, eval_seed))
    results = _run_parallel(_transfer_one, payloads, args.workers)

    success_counts = [res["eval_successes"] for res in results]
    total = sum(success_counts)
    rate = total / (args.agents * args.episodes)
    buckets = [sum(1 for c in success_counts if c == b) for b in range(args.episodes + 1)]
    tree = {
        "scenario": scenario.name,
        "train_backend": train_backend.name,
        "eval_backend": eval_backend.name,
        "eval_failure_prob": eval_backend.failure_prob,
        "agents": args.agents,
        "evals_per_agent": args.episodes,
        "seed": args.seed,
        "per_agent": [
            {k: res[k] for k in
             ("train_seed", "train_success", "train_iterations", "eval_successes", "goal_steps")}
            for res in results
        ],
        "total_successes": total,
        "success_rate": rate,
        "histogram": {str(b): buckets[b] for b in range(args.episodes + 1)},
    }
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "transfer_report.json", tree)
        with open(out / "histogram.csv", "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["successes", "agent_count"])
            for b in range(args.episodes + 1):
                writer.writerow([b, buckets[b]])
        save_success_histogram(success_counts, args.episodes, out / "histogram.png")
        policies = out / "policies"
        policies.mkdir(exist_ok=True)
        for i, res in enumerate(results):
            _write_json(policies / f"agent{i:02d}.json", res["policy"])
        _write_meta(out, args)
    print(f"transfer {train_backend.name} -> {eval_backend.name}: "
          f"{total}/{args.agents * args.episodes} successes (rate {rate:.2f})")
    print("histogram (successes: agents): "
          + ", ".join(f"{b}: {buckets[b]}" for b in range(args.episodes + 1) if buckets[b]))
    return EXIT_OK


def cmd_layout(args) -> int:
    scenario = load_scenario(args.scenario)
    wrapper = FlatWrapper(scenario)
    text = wrapper.layout_json()
    out = _out_dir(args)
    if out is not None:
        (out / "layout.json").write_text(text + "\n", encoding="utf-8")
        _write_meta(out, args)
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(parser: argparse.ArgumentParser, backend: bool = True) -> None:
    parser.add_argument("--scenario", default="builtin",
                        help="'builtin' or a path to a scenario bundle")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default=None, help="directory for output files")
    if backend:
        parser.add_argument("--backend", default="sim",
                            choices=["sim", "flawed-sim", "emu-proxy"])
        parser.add_argument("--failure-prob", type=float, default=None,
                            help="per-action failure probability for emu-proxy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redsim",
        description="Killchain gym: simulate, plan, train and transfer red agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario bundle")
    p.add_argument("scenario", nargs="?", default="builtin")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", help="shortest goal-reaching action sequence")
    _add_common(p)
    p.add_argument("--node-budget", type=int, default=10**6)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run one episode with a named policy")
    _add_common(p)
    p.add_argument("--policy", default="scripted", choices=["scripted", "random", "greedy"])
    p.add_argument("--policy-file", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help="train Q-learning agents")
    _add_common(p)
    p.add_argument("--iterations", type=int, default=2500)
    p.add_argument("--agents", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy over fresh episodes")
    _add_common(p)
    p.add_argument("--policy", default="scripted", choices=["scripted", "random", "greedy"])
    p.add_argument("--policy-file", default=None)
    p.add_argument("--episodes", type=int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("transfer", help="train N agents on one backend, evaluate on another")
    p.add_argument("--scenario", default="builtin")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--train-backend", default="sim", choices=["sim", "flawed-sim", "emu-proxy"])
    p.add_argument("--eval-backend", default="emu-proxy",
                   choices=["sim", "flawed-sim", "emu-proxy"])
    p.add_argument("--failure-prob", type=float, default=None)
    p.add_argument("--iterations", type=int, default=2500)
    p.add_argument("--agents", type=int, default=21)
    p.add_argument("--episodes", type=int, default=10,
                   help="evaluations per trained agent")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("layout", help="print the observation/action slot map")
    p.add_argument("--scenario", default="builtin")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_layout)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RedsimError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
