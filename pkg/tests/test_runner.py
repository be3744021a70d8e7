"""Episode driver, replay files, anchor computation, benchmark scoring."""
import filecmp
import json
import os

import numpy as np
import pytest

from gridops import runner
from gridops.agents import make_agent
from gridops.exceptions import BenchmarkError
from gridops.model import parse_grid
from gridops.powerflow import SolverConfig
from gridops.rules import OpponentConfig, RulesConfig
from gridops.runner import (
    AnchorCosts,
    BehaviorStats,
    EpisodeResult,
    RunProfile,
    analyze_replays,
    compute_anchors,
    default_profile,
    run_benchmark,
    run_episode,
    write_behavior_csv,
)
from gridops.scoring import CostConfig

from conftest import _gen, _line, constant_chronics, parallel_grid

DC_PROFILE = RunProfile(
    rules=RulesConfig(), opponent=OpponentConfig(), cost=CostConfig(),
    solver=SolverConfig(method="DC"),
)


def resistive_grid():
    """Parallel pair with real losses so costs are strictly positive."""
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": "sub_000"}, {"id": "sub_001"}],
        "lines": [
            _line("line_000", "sub_000", "sub_001", 0.08, r=0.01, limit=100.0),
            _line("line_001", "sub_000", "sub_001", 0.08, r=0.01, limit=100.0),
        ],
        "generators": [_gen("gen_000", "sub_000", 200.0)],
        "loads": [{"id": "load_000", "sub_id": "sub_001"}],
    })


# ---- run_episode -----------------------------------------------------------------


def test_completed_episode_result():
    model = parallel_grid()
    result = run_episode(model, constant_chronics(model, 6, 100.0),
                         make_agent("do_nothing", model), DC_PROFILE)
    assert result == EpisodeResult(
        scenario_id="const", agent="do_nothing", survived_steps=6, step_count=6,
        done_reason="horizon_reached", loss_cost=0.0, redispatch_cost=0.0,
        blackout_cost=0.0, replay_path=None,
    )
    assert result.survival_fraction == 1.0
    assert result.cumulative_cost == 0.0


def test_blackout_episode_charges_the_tail():
    model = parallel_grid()
    result = run_episode(model, constant_chronics(model, 6, 220.0),
                         make_agent("do_nothing", model), DC_PROFILE)
    assert result.survived_steps == 2  # soft overflow with a 3-solve fuse
    assert result.done_reason == "blackout_load_lost"
    assert result.blackout_cost == pytest.approx(4 * 220.0 * 700.0 / 12.0)
    assert result.cumulative_cost == result.blackout_cost


def test_unservable_scenario_blacks_out_at_step_zero():
    model = parallel_grid()
    result = run_episode(model, constant_chronics(model, 6, 500.0),
                         make_agent("do_nothing", model), DC_PROFILE)
    assert result.survived_steps == 0
    assert result.survival_fraction == 0.0
    assert result.blackout_cost == pytest.approx(6 * 500.0 * 700.0 / 12.0)


def test_replay_file_structure(tmp_path):
    model = parallel_grid()
    path = str(tmp_path / "replays" / "episode.jsonl")
    run_episode(model, constant_chronics(model, 4, 100.0),
                make_agent("do_nothing", model), DC_PROFILE, replay_path=path)

    records = [json.loads(line) for line in open(path, encoding="utf-8")]
    header, steps, footer = records[0], records[1:-1], records[-1]

    assert header["kind"] == "header"
    assert header["format"] == 1
    assert header["scenario"] == "const"
    assert header["agent"] == "do_nothing"
    assert header["step_count"] == 4
    assert len(header["model_digest"]) == 64
    assert len(header["config_digest"]) == 64

    assert [s["t"] for s in steps] == [1, 2, 3, 4]
    for s in steps:
        assert s["kind"] == "step"
        assert s["action"] == {}
        assert len(s["obs_digest"]) == 64
        assert len(s["rho"]) == 2
    assert [s["flags"]["done"] for s in steps] == [False, False, False, True]

    assert footer == {
        "kind": "result", "survived_steps": 4, "step_count": 4,
        "done_reason": "horizon_reached", "loss_cost": 0.0,
        "redispatch_cost": 0.0, "blackout_cost": 0.0,
    }
    # every line is its own sorted-keys JSON document
    for line in open(path, encoding="utf-8"):
        assert line == json.dumps(json.loads(line), sort_keys=True) + "\n"


# ---- anchors ----------------------------------------------------------------------


def test_anchors_for_a_failing_scenario():
    model = parallel_grid()
    anchors = compute_anchors(model, constant_chronics(model, 6, 220.0), DC_PROFILE)
    assert anchors.c_blackout == pytest.approx(6 * 220.0 * 700.0 / 12.0)
    assert anchors.c_dn == pytest.approx(4 * 220.0 * 700.0 / 12.0)
    assert anchors.c_ref == 0.0  # lossless twin completes at zero cost
    assert not anchors.dn_completed
    assert anchors.dn_survived == 2


def test_anchors_for_a_completing_scenario():
    model = resistive_grid()
    profile = default_profile()
    anchors = compute_anchors(model, constant_chronics(model, 6, 100.0), profile)
    assert anchors.dn_completed
    assert anchors.dn_survived == 6
    assert anchors.c_dn > 0.0  # real losses
    assert anchors.c_ref == pytest.approx(anchors.c_dn)  # same run, loss-only
    assert anchors.c_blackout > anchors.c_dn


def test_anchor_twin_excludes_opponent_and_maintenance():
    model = resistive_grid()
    chron = constant_chronics(model, 30, 100.0, maintenance=(("line_000", 2, 6),))
    profile = default_profile(opponent=OpponentConfig(
        enabled=True, attackable_lines=("line_001",), attack_probability=1.0, seed=2,
    ))
    anchors = compute_anchors(model, chron, profile)
    # the attacked/maintained run pays more than the clean reference twin
    assert anchors.c_dn > anchors.c_ref > 0.0


def test_anchor_cache_round_trip(tmp_path):
    model = parallel_grid()
    chron = constant_chronics(model, 6, 220.0)
    cache = str(tmp_path / "anchors")

    first = compute_anchors(model, chron, DC_PROFILE, cache_dir=cache)
    files = os.listdir(cache)
    assert len(files) == 1

    # the cached payload is authoritative on later calls
    path = os.path.join(cache, files[0])
    payload = json.load(open(path, encoding="utf-8"))
    payload["c_dn"] = 123.0
    json.dump(payload, open(path, "w", encoding="utf-8"))
    second = compute_anchors(model, chron, DC_PROFILE, cache_dir=cache)
    assert second.c_dn == 123.0
    assert first.c_blackout == second.c_blackout


# ---- run_benchmark ----------------------------------------------------------------


def _scenario_set(model):
    return [
        constant_chronics(model, 6, 100.0, scenario_id="calm"),
        constant_chronics(model, 6, 220.0, scenario_id="overloaded"),
    ]


def test_benchmark_scores_and_csvs(tmp_path):
    model = resistive_grid()
    out = str(tmp_path / "bench")
    report = run_benchmark(model, _scenario_set(model), "do_nothing",
                           default_profile(), out_dir=out)

    assert report.agent == "do_nothing"
    assert [r.scenario_id for r in report.rows] == ["calm", "overloaded"]

    calm, overloaded = report.rows
    assert calm.done_reason == "horizon_reached"
    assert calm.score == pytest.approx(80.0)  # dn completing IS the reference
    assert overloaded.done_reason == "blackout_load_lost"
    assert overloaded.score == pytest.approx(0.0, abs=1e-12)  # dn cost is the dn anchor
    assert report.mean_score == pytest.approx((calm.score + overloaded.score) / 2)
    assert not report.budget_exceeded

    assert report.heatmap["do_nothing"]["calm"] == 1.0
    assert report.heatmap["do_nothing"]["overloaded"] == pytest.approx(2 / 6)

    scores = open(os.path.join(out, "scores.csv"), encoding="utf-8").read().splitlines()
    assert scores[0] == "scenario,score,survived_steps,step_count,cumulative_cost,done_reason"
    assert scores[1].startswith("calm,")
    assert scores[-1].startswith("mean,")

    heat = open(os.path.join(out, "heatmap.csv"), encoding="utf-8").read().splitlines()
    assert heat[0] == "agent,calm,overloaded"
    assert len(heat) == 2  # do_nothing is both the agent and the baseline row

    assert os.path.exists(os.path.join(out, "replays", "calm-do_nothing.jsonl"))
    assert os.path.exists(os.path.join(out, "replays", "overloaded-do_nothing.jsonl"))


def test_benchmark_heatmap_carries_both_agents(tmp_path):
    model = resistive_grid()
    report = run_benchmark(model, _scenario_set(model), "reconnect", default_profile())
    assert set(report.heatmap) == {"reconnect", "do_nothing"}


def test_benchmark_requires_scenarios():
    with pytest.raises(BenchmarkError):
        run_benchmark(parallel_grid(), [], "do_nothing", DC_PROFILE)


def test_benchmark_time_budget_flattens_scores():
    model = resistive_grid()
    report = run_benchmark(model, _scenario_set(model), "do_nothing",
                           default_profile(), time_budget_s=0.0)
    assert report.budget_exceeded
    assert all(r.score == -100.0 for r in report.rows)
    assert all(r.done_reason == "time_budget_exceeded" for r in report.rows)
    assert report.mean_score == -100.0


def test_benchmark_isolates_agent_errors(monkeypatch):
    class Boom:
        name = "boom"

        def act(self, obs, env):
            raise RuntimeError("kaput")

    real = runner.make_agent

    def patched(name, model, cfg=None):
        return Boom() if name == "boom" else real(name, model, cfg)

    monkeypatch.setattr(runner, "make_agent", patched)
    model = resistive_grid()
    report = run_benchmark(model, _scenario_set(model), "boom", default_profile())

    assert all(r.score == -100.0 for r in report.rows)
    assert all(r.done_reason == "agent_error" for r in report.rows)
    assert all("kaput" in r.agent_error for r in report.rows)
    assert report.heatmap["boom"] == {"calm": 0.0, "overloaded": 0.0}
    # the do-nothing baseline row is still real
    assert report.heatmap["do_nothing"]["calm"] == 1.0


def test_benchmark_runs_are_byte_identical(tmp_path):
    model = resistive_grid()
    profile = default_profile(seed=3, opponent=OpponentConfig(
        enabled=True, attackable_lines=("line_000", "line_001"),
        attack_probability=0.5, seed=9,
    ))

    def run(tag):
        out = str(tmp_path / tag)
        run_benchmark(model, _scenario_set(model), "reconnect", profile, out_dir=out)
        return out

    a, b = run("first"), run("second")
    for rel in ["scores.csv", "heatmap.csv",
                "replays/calm-reconnect.jsonl", "replays/overloaded-reconnect.jsonl"]:
        assert filecmp.cmp(os.path.join(a, rel), os.path.join(b, rel), shallow=False), rel


def test_benchmark_parallel_jobs_match_serial(tmp_path):
    model = resistive_grid()
    serial = run_benchmark(model, _scenario_set(model), "do_nothing", default_profile())
    parallel = run_benchmark(model, _scenario_set(model), "do_nothing",
                             default_profile(), jobs=2)
    assert serial.rows == parallel.rows
    assert serial.mean_score == parallel.mean_score


# ---- replay analytics ----------------------------------------------------------------


def _write_replay(path, actions):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", "format": 1}) + "\n")
        for t, action in enumerate(actions, start=1):
            fh.write(json.dumps({"kind": "step", "t": t, "action": action}) + "\n")
        fh.write(json.dumps({"kind": "result"}) + "\n")


def test_analyze_replays_counts_runs_and_substations(tmp_path):
    split_a = {"sub_reconfig": {"sub_id": "sub_001", "assignment": [1, 2]}}
    split_b = {"sub_reconfig": {"sub_id": "sub_003", "assignment": [1, 1]}}
    reconnect = {"line_set": {"line_id": "line_000", "status": 1}}
    path = str(tmp_path / "replay.jsonl")
    _write_replay(path, [split_a, split_a, reconnect, {}, split_b, {}, {}, reconnect])

    stats = analyze_replays([path])

    assert stats == BehaviorStats(
        sub_counts={"sub_001": 2, "sub_003": 1},
        sequence_lengths={3: 1, 1: 2},  # the trailing run is flushed at EOF
        distinct_substations=2,
        action_steps=5,
        total_steps=8,
    )


def test_analyze_replays_aggregates_files(tmp_path):
    split = {"sub_reconfig": {"sub_id": "sub_001", "assignment": [1, 2]}}
    p1, p2 = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
    _write_replay(p1, [split, {}])
    _write_replay(p2, [split, split])
    stats = analyze_replays([p1, p2])
    assert stats.sub_counts == {"sub_001": 3}
    assert stats.sequence_lengths == {1: 1, 2: 1}
    assert stats.total_steps == 4


def test_analyze_replays_reports_corrupt_lines(tmp_path):
    path = str(tmp_path / "bad.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('{"kind": "step", "action": {}}\n')
        fh.write("not json\n")
    with pytest.raises(BenchmarkError, match="line 2"):
        analyze_replays([path])


def test_behavior_csvs(tmp_path):
    stats = BehaviorStats(
        sub_counts={"sub_002": 4, "sub_001": 7},
        sequence_lengths={2: 3, 1: 5},
        distinct_substations=2, action_steps=13, total_steps=40,
    )
    out = str(tmp_path / "behavior")
    write_behavior_csv(stats, out)

    subs = open(os.path.join(out, "substation_counts.csv"), encoding="utf-8").read()
    assert subs == "substation,actions\nsub_001,7\nsub_002,4\n"
    seqs = open(os.path.join(out, "sequence_lengths.csv"), encoding="utf-8").read()
    assert seqs == "length,occurrences\n1,5\n2,3\n"
