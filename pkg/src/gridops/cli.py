"""Command-line entry point: run episodes, score agents, generate scenarios,
analyze replays.

Configuration comes from an optional JSON file plus flag overrides (flags
win).  Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import glob as globmod
import json
import os
import sys
from datetime import datetime, timezone

from . import __version__
from .agents import GreedyConfig
from .chronics import MixConfig, generate_synthetic, load_scenario, renewable_energy_share, save_scenario
from .encoding import model_digest
from .exceptions import BenchmarkError, ChronicsError, GridFormatError
from .model import load_grid
from .powerflow import SolverConfig
from .rules import OpponentConfig, RulesConfig
from .runner import (
    RunProfile,
    analyze_replays,
    run_benchmark,
    run_episode,
    write_behavior_csv,
)
from .scoring import CostConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _build(cls, raw: dict, name: str):
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name} section: {exc}") from exc


def _profile_from(config: dict, seed: int) -> RunProfile:
    opponent_raw = dict(config.get("opponent", {}))
    if "attackable_lines" in opponent_raw:
        opponent_raw["attackable_lines"] = tuple(opponent_raw["attackable_lines"])
    return RunProfile(
        rules=_build(RulesConfig, config.get("rules", {}), "rules"),
        opponent=_build(OpponentConfig, opponent_raw, "opponent"),
        cost=_build(CostConfig, config.get("cost", {}), "cost"),
        solver=_build(SolverConfig, config.get("solver", {}), "solver"),
        seed=seed,
    )


def _greedy_from(config: dict) -> GreedyConfig | None:
    raw = config.get("greedy")
    if raw is None:
        return None
    return _build(GreedyConfig, raw, "greedy")


def _resolve(config: dict, args, key: str, default=None):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    return config.get(key, default)


def _scenario_paths(config: dict, args) -> list[str]:
    configured = config.get("scenarios", [])
    if not isinstance(configured, list):
        raise ConfigError("config 'scenarios' must be a list of directories")
    paths = list(args.scenario or []) or list(configured)
    out = []
    for p in paths:
        hits = sorted(globmod.glob(p)) if any(c in p for c in "*?[") else [p]
        out.extend(hits or [p])
    if not out:
        raise ConfigError("no scenario given: pass --scenario or config 'scenarios'")
    for p in out:
        if not os.path.isdir(p):
            raise ConfigError(f"scenario directory not found: {p}")
    return out


def _write_manifest(out_dir: str, payload: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    payload = dict(payload)
    payload["version"] = __version__
    payload["created_at"] = datetime.now(timezone.utc).isoformat()
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _grid(config: dict, args):
    path = _resolve(config, args, "grid")
    if path is None:
        raise ConfigError("no grid given: pass --grid or config 'grid'")
    return load_grid(path)


def cmd_run(args) -> int:
    config = _load_config(args.config)
    model = _grid(config, args)
    seed = int(_resolve(config, args, "seed", 0))
    profile = _profile_from(config, seed)
    agent_name = _resolve(config, args, "agent", "do_nothing")
    from .agents import make_agent

    agent = make_agent(agent_name, model, _greedy_from(config))
    out_dir = _resolve(config, args, "out", "runs")
    results = []
    for path in _scenario_paths(config, args):
        chronics = load_scenario(path, model)
        replay = os.path.join(out_dir, "replays", f"{chronics.id}-{agent_name}.jsonl")
        episode = run_episode(model, chronics, agent, profile, replay)
        results.append(episode)
        payload = dataclasses.asdict(episode)
        payload["cumulative_cost"] = episode.cumulative_cost
        with open(os.path.join(out_dir, f"episode-{chronics.id}.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(
            f"{chronics.id}: survived {episode.survived_steps}/{episode.step_count} "
            f"({episode.done_reason}), cost {episode.cumulative_cost:.2f}"
        )
    _write_manifest(out_dir, {
        "command": "run",
        "agent": agent_name,
        "model_digest": model_digest(model),
        "config_digest": profile.digest(),
        "scenarios": [r.scenario_id for r in results],
    })
    return EXIT_OK


def cmd_score(args) -> int:
    config = _load_config(args.config)
    model = _grid(config, args)
    seed = int(_resolve(config, args, "seed", 0))
    profile = _profile_from(config, seed)
    agent_name = _resolve(config, args, "agent", "do_nothing")
    out_dir = _resolve(config, args, "out", "scores")
    budget = _resolve(config, args, "time_budget", None)
    jobs = int(_resolve(config, args, "jobs", 1))
    scenarios = [load_scenario(p, model) for p in _scenario_paths(config, args)]
    report = run_benchmark(
        model, scenarios, agent_name, profile,
        out_dir=out_dir,
        greedy_cfg=_greedy_from(config),
        time_budget_s=None if budget is None else float(budget),
        jobs=jobs,
        anchor_cache_dir=os.path.join(out_dir, "anchor_cache"),
    )
    _write_manifest(out_dir, {
        "command": "score",
        "agent": agent_name,
        "model_digest": model_digest(model),
        "config_digest": profile.digest(),
        "scenarios": [r.scenario_id for r in report.rows],
        "budget_exceeded": report.budget_exceeded,
    })
    for row in report.rows:
        print(f"{row.scenario_id}: score {row.score:.2f}, survived {row.survived_steps}/{row.step_count}")
    print(f"mean score: {report.mean_score:.2f}")
    if report.budget_exceeded:
        print("time budget exceeded: all scenarios scored -100", file=sys.stderr)
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    model = _grid(config, args)
    gen_cfg = config.get("generate", {})
    count = int(gen_cfg.get("count", 1))
    share = float(gen_cfg.get("renewable_share", 0.10))
    days = int(gen_cfg.get("days", 7))
    seed = int(_resolve(config, args, "seed", gen_cfg.get("seed", 0)))
    out_dir = _resolve(config, args, "out", "scenarios")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for k in range(count):
        mix = MixConfig(renewable_share=share, seed=seed + k, days=days)
        chronics = generate_synthetic(model, mix, scenario_id=f"scenario_{seed + k:03d}")
        directory = os.path.join(out_dir, chronics.id)
        save_scenario(chronics, directory)
        written.append({
            "id": chronics.id,
            "seed": seed + k,
            "renewable_share": share,
            "realized_share": renewable_energy_share(chronics, model),
            "steps": chronics.step_count,
        })
        print(f"{chronics.id}: {chronics.step_count} steps, realized share {written[-1]['realized_share']:.3f}")
    _write_manifest(out_dir, {
        "command": "generate",
        "model_digest": model_digest(model),
        "scenarios": written,
    })
    return EXIT_OK


def cmd_analyze(args) -> int:
    paths = []
    for pattern in args.replay:
        hits = sorted(globmod.glob(pattern)) if any(c in pattern for c in "*?[") else [pattern]
        paths.extend(hits)
    if not paths:
        raise ConfigError("no replay files matched")
    for p in paths:
        if not os.path.isfile(p):
            raise ConfigError(f"replay not found: {p}")
    stats = analyze_replays(paths)
    out_dir = args.out or "analysis"
    write_behavior_csv(stats, out_dir)
    print(f"steps analyzed: {stats.total_steps}; action steps: {stats.action_steps}")
    print(f"distinct substations touched: {stats.distinct_substations}")
    for sid in sorted(stats.sub_counts):
        print(f"  {sid}: {stats.sub_counts[sid]}")
    if stats.sequence_lengths:
        dist = ", ".join(f"{k}x{v}" for k, v in sorted(stats.sequence_lengths.items()))
        print(f"sequence lengths (length x occurrences): {dist}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridops",
        description="Power-network operation simulator and benchmark harness",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--grid", help="grid description JSON")
        if scenario:
            p.add_argument("--scenario", action="append", help="scenario directory (repeatable, glob ok)")
        p.add_argument("--agent", help="agent name")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--jobs", type=int, help="parallel scenario workers")
        p.add_argument("--time-budget", type=float, dest="time_budget", help="wall-clock budget in seconds")
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="run one episode per scenario")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_score = sub.add_parser("score", help="benchmark an agent over scenarios")
    common(p_score)
    p_score.set_defaults(func=cmd_score)

    p_gen = sub.add_parser("generate", help="generate synthetic scenarios")
    common(p_gen, scenario=False)
    p_gen.set_defaults(func=cmd_generate)

    p_an = sub.add_parser("analyze", help="behavior statistics from replays")
    p_an.add_argument("--out", help="output directory")
    p_an.add_argument("replay", nargs="+", help="replay files or globs")
    p_an.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridFormatError, ChronicsError, BenchmarkError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
