"""Episode execution, replay files, benchmark scoring, and replay analytics.

Replays are JSON-lines: a header record with model/config digests, one record
per step, and a result footer.  All records serialize with sorted keys so
identical runs produce byte-identical files.
"""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .agents import GreedyConfig, make_agent
from .chronics import ScenarioChronics, load_scenario
from .encoding import config_digest, encode_observation, model_digest, observation_digest
from .env import Environment
from .exceptions import BenchmarkError, GridOpsError
from .model import GridModel
from .powerflow import SolverConfig
from .rules import REASON_HORIZON, OpponentConfig, RulesConfig
from .scoring import CostConfig, ScoreAnchors, blackout_tail_cost, normalize_score

REPLAY_FORMAT = 1


@dataclass(frozen=True)
class EpisodeResult:
    scenario_id: str
    agent: str
    survived_steps: int
    step_count: int
    done_reason: str
    loss_cost: float
    redispatch_cost: float
    blackout_cost: float
    replay_path: str | None = None

    @property
    def cumulative_cost(self) -> float:
        return self.loss_cost + self.redispatch_cost + self.blackout_cost

    @property
    def survival_fraction(self) -> float:
        return self.survived_steps / self.step_count


@dataclass(frozen=True)
class ScenarioScore:
    scenario_id: str
    score: float
    survived_steps: int
    step_count: int
    cumulative_cost: float
    done_reason: str
    agent_error: str | None = None

    @property
    def survival_fraction(self) -> float:
        return self.survived_steps / self.step_count


@dataclass(frozen=True)
class ScoreReport:
    agent: str
    rows: tuple[ScenarioScore, ...]
    mean_score: float
    budget_exceeded: bool
    # agent name -> scenario id -> fraction of horizon survived
    heatmap: dict[str, dict[str, float]]


@dataclass(frozen=True)
class RunProfile:
    """Everything an episode needs beyond the scenario itself."""

    rules: RulesConfig
    opponent: OpponentConfig
    cost: CostConfig
    solver: SolverConfig
    seed: int = 0

    def digest(self) -> str:
        return config_digest(
            {
                "rules": asdict(self.rules),
                "opponent": asdict(self.opponent),
                "cost": asdict(self.cost),
                "solver": asdict(self.solver),
                "seed": self.seed,
            }
        )


def default_profile(seed: int = 0, opponent: OpponentConfig | None = None) -> RunProfile:
    return RunProfile(
        rules=RulesConfig(),
        opponent=opponent or OpponentConfig(),
        cost=CostConfig(),
        solver=SolverConfig(),
        seed=seed,
    )


def run_episode(model: GridModel, chronics: ScenarioChronics, agent, profile: RunProfile,
                replay_path: str | None = None) -> EpisodeResult:
    """Run one episode to completion, optionally writing a replay file."""
    env = Environment(
        model, chronics,
        rules=profile.rules, opponent=profile.opponent,
        cost=profile.cost, solver=profile.solver,
        seed=profile.seed,
    )
    obs = env.reset()
    writer = None
    if replay_path is not None:
        os.makedirs(os.path.dirname(os.path.abspath(replay_path)), exist_ok=True)
        writer = open(replay_path, "w", encoding="utf-8")
        header = {
            "kind": "header",
            "format": REPLAY_FORMAT,
            "scenario": chronics.id,
            "agent": agent.name,
            "seed": profile.seed,
            "step_count": chronics.step_count,
            "model_digest": model_digest(model),
            "config_digest": profile.digest(),
            "version": __version__,
        }
        writer.write(json.dumps(header, sort_keys=True) + "\n")

    loss = redisp = blackout = 0.0
    try:
        if env.done:  # failed on the initial solve: the blackout-at-start case
            blackout = blackout_tail_cost(env.chronics.load_p, 0, profile.cost)
        while not env.done:
            action = agent.act(obs, env)
            result = env.step(action)
            obs = result.observation
            cost = result.info["cost"]
            loss += cost.loss_cost
            redisp += cost.redispatch_cost
            blackout += cost.blackout_cost
            if writer is not None:
                record = {
                    "kind": "step",
                    "t": int(env.state.t),
                    "action": action.to_dict(),
                    "obs_digest": observation_digest(encode_observation(obs, model)),
                    "rho": [float(x) for x in obs.rho],
                    "reward": float(result.reward),
                    "cost": {
                        "loss": cost.loss_cost,
                        "redispatch": cost.redispatch_cost,
                        "blackout": cost.blackout_cost,
                    },
                    "flags": {
                        "illegal": bool(result.info["illegal_action"]),
                        "cascade_trips": list(result.info["cascade_trips"]),
                        "opponent_attack": result.info["opponent_attack"],
                        "maintenance_started": list(result.info["maintenance_started"]),
                        "redispatch_infeasible": bool(result.info["redispatch_infeasible"]),
                        "done": bool(result.done),
                        "done_reason": result.info["done_reason"],
                    },
                }
                writer.write(json.dumps(record, sort_keys=True) + "\n")
        survived = env.state.t
        reason = env.state.done_reason
        if writer is not None:
            footer = {
                "kind": "result",
                "survived_steps": int(survived),
                "step_count": chronics.step_count,
                "done_reason": reason,
                "loss_cost": loss,
                "redispatch_cost": redisp,
                "blackout_cost": blackout,
            }
            writer.write(json.dumps(footer, sort_keys=True) + "\n")
    finally:
        if writer is not None:
            writer.close()
    return EpisodeResult(
        scenario_id=chronics.id,
        agent=agent.name,
        survived_steps=int(survived),
        step_count=chronics.step_count,
        done_reason=reason,
        loss_cost=loss,
        redispatch_cost=redisp,
        blackout_cost=blackout,
        replay_path=replay_path,
    )


# ---- anchors ---------------------------------------------------------------


@dataclass(frozen=True)
class AnchorCosts:
    c_blackout: float
    c_dn: float
    c_ref: float
    dn_completed: bool
    dn_survived: int

    def score_anchors(self) -> ScoreAnchors:
        return ScoreAnchors.make(self.c_blackout, self.c_dn, self.c_ref, self.dn_completed)


def compute_anchors(model: GridModel, chronics: ScenarioChronics, profile: RunProfile,
                    cache_dir: str | None = None) -> AnchorCosts:
    """Do-nothing and reference anchor costs for one scenario, disk-cached.

    The reference completion cost is the loss-only cost of a do-nothing run
    on a twin of the scenario with no opponent and no maintenance.
    """
    key = None
    if cache_dir is not None:
        key = os.path.join(cache_dir, f"{chronics.id}-{profile.digest()[:16]}.json")
        if os.path.exists(key):
            with open(key, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
            return AnchorCosts(**raw)

    dn = make_agent("do_nothing", model)
    c_blackout = blackout_tail_cost(chronics.load_p, 0, profile.cost)
    real = run_episode(model, chronics, dn, profile)
    twin_profile = replace(profile, opponent=replace(profile.opponent, enabled=False))
    twin = run_episode(model, replace(chronics, maintenance=()), dn, twin_profile)
    anchors = AnchorCosts(
        c_blackout=c_blackout,
        c_dn=real.cumulative_cost,
        c_ref=twin.loss_cost,
        dn_completed=real.done_reason == REASON_HORIZON,
        dn_survived=real.survived_steps,
    )
    if key is not None:
        os.makedirs(cache_dir, exist_ok=True)
        with open(key, "w", encoding="utf-8") as fh:
            json.dump(asdict(anchors), fh, sort_keys=True)
    return anchors


# ---- benchmark --------------------------------------------------------------


def _run_one(args):
    model, chronics, agent_name, greedy_cfg, profile, replay_path, anchor_cache_dir = args
    agent = make_agent(agent_name, model, greedy_cfg)
    anchors = compute_anchors(model, chronics, profile, cache_dir=anchor_cache_dir)
    try:
        episode = run_episode(model, chronics, agent, profile, replay_path)
        err = None
    except GridOpsError as exc:  # structural/usage failures inside the agent
        episode, err = None, str(exc)
    except Exception as exc:  # noqa: BLE001 - agent bugs must not kill the run
        episode, err = None, f"{type(exc).__name__}: {exc}"
    return chronics.id, anchors, episode, err


def run_benchmark(model: GridModel, scenarios: list[ScenarioChronics], agent_name: str,
                  profile: RunProfile, out_dir: str | None = None,
                  greedy_cfg: GreedyConfig | None = None,
                  time_budget_s: float | None = None,
                  jobs: int = 1,
                  anchor_cache_dir: str | None = None) -> ScoreReport:
    """Score an agent over a scenario set with the four-anchor normalization.

    Exceeding the wall-clock budget turns the whole report into -100s; an
    agent error turns only that scenario into -100.
    """
    if not scenarios:
        raise BenchmarkError("benchmark needs at least one scenario")
    started = time.monotonic()
    scenarios = sorted(scenarios, key=lambda c: c.id)
    work = []
    for ch in scenarios:
        replay_path = None
        if out_dir is not None:
            replay_path = os.path.join(out_dir, "replays", f"{ch.id}-{agent_name}.jsonl")
        work.append((model, ch, agent_name, greedy_cfg, profile, replay_path, anchor_cache_dir))

    results = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for sid, anchors, episode, err in pool.map(_run_one, work):
                results[sid] = (anchors, episode, err)
    else:
        for item in work:
            sid, anchors, episode, err = _run_one(item)
            results[sid] = (anchors, episode, err)

    budget_exceeded = time_budget_s is not None and (time.monotonic() - started) > time_budget_s
    rows = []
    heat_agent = {}
    heat_dn = {}
    for ch in scenarios:
        anchors, episode, err = results[ch.id]
        heat_dn[ch.id] = anchors.dn_survived / ch.step_count
        if budget_exceeded:
            rows.append(ScenarioScore(ch.id, -100.0,
                                      0 if episode is None else episode.survived_steps,
                                      ch.step_count,
                                      0.0 if episode is None else episode.cumulative_cost,
                                      "time_budget_exceeded"))
            heat_agent[ch.id] = 0.0 if episode is None else episode.survival_fraction
            continue
        if err is not None:
            rows.append(ScenarioScore(ch.id, -100.0, 0, ch.step_count, 0.0, "agent_error", err))
            heat_agent[ch.id] = 0.0
            continue
        score = normalize_score(episode.cumulative_cost, anchors.score_anchors())
        rows.append(ScenarioScore(ch.id, score, episode.survived_steps, ch.step_count,
                                  episode.cumulative_cost, episode.done_reason))
        heat_agent[ch.id] = episode.survival_fraction
    mean = float(np.mean([r.score for r in rows]))
    report = ScoreReport(
        agent=agent_name,
        rows=tuple(rows),
        mean_score=mean,
        budget_exceeded=budget_exceeded,
        heatmap={agent_name: heat_agent, "do_nothing": heat_dn},
    )
    if out_dir is not None:
        write_score_csv(report, os.path.join(out_dir, "scores.csv"))
        write_heatmap_csv(report, os.path.join(out_dir, "heatmap.csv"))
    return report


def write_score_csv(report: ScoreReport, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    lines = ["scenario,score,survived_steps,step_count,cumulative_cost,done_reason"]
    for r in report.rows:
        lines.append(
            f"{r.scenario_id},{r.score!r},{r.survived_steps},{r.step_count},"
            f"{r.cumulative_cost!r},{r.done_reason}"
        )
    lines.append(f"mean,{report.mean_score!r},,,,")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_heatmap_csv(report: ScoreReport, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    scenarios = [r.scenario_id for r in report.rows]
    lines = ["agent," + ",".join(scenarios)]
    for agent in sorted(report.heatmap):
        fractions = report.heatmap[agent]
        lines.append(agent + "," + ",".join(repr(float(fractions[s])) for s in scenarios))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---- replay analytics -------------------------------------------------------


@dataclass(frozen=True)
class BehaviorStats:
    sub_counts: dict[str, int]
    sequence_lengths: dict[int, int]
    distinct_substations: int
    action_steps: int
    total_steps: int


def analyze_replays(paths: list[str]) -> BehaviorStats:
    """Per-substation reconfiguration counts and action-run statistics.

    A sequence is a maximal run of consecutive non-do-nothing steps.
    """
    sub_counts: dict[str, int] = {}
    seq: dict[int, int] = {}
    action_steps = 0
    total_steps = 0
    for path in paths:
        run = 0
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise BenchmarkError(f"{path}: line {lineno}: not valid JSON ({exc})") from exc
                if record.get("kind") != "step":
                    continue
                total_steps += 1
                action = record.get("action", {})
                if "sub_reconfig" in action:
                    sid = action["sub_reconfig"]["sub_id"]
                    sub_counts[sid] = sub_counts.get(sid, 0) + 1
                if action:
                    action_steps += 1
                    run += 1
                elif run:
                    seq[run] = seq.get(run, 0) + 1
                    run = 0
        if run:
            seq[run] = seq.get(run, 0) + 1
    return BehaviorStats(
        sub_counts=sub_counts,
        sequence_lengths=seq,
        distinct_substations=len(sub_counts),
        action_steps=action_steps,
        total_steps=total_steps,
    )


def write_behavior_csv(stats: BehaviorStats, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "substation_counts.csv"), "w", encoding="utf-8") as fh:
        fh.write("substation,actions\n")
        for sid in sorted(stats.sub_counts):
            fh.write(f"{sid},{stats.sub_counts[sid]}\n")
    with open(os.path.join(out_dir, "sequence_lengths.csv"), "w", encoding="utf-8") as fh:
        fh.write("length,occurrences\n")
        for length in sorted(stats.sequence_lengths):
            fh.write(f"{length},{stats.sequence_lengths[length]}\n")
