"""Baseline policies: do-nothing, reconnect, expert rules, greedy simulation.

Agents decide from the observation plus the environment's simulate handle.
All are deterministic given the observation and simulate results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import DO_NOTHING, Action, LineSet, SubReconfig
from .model import GridModel, enumerate_unitary_topology_actions


@dataclass(frozen=True)
class GreedyConfig:
    max_candidates: int = 200
    rho_safe_threshold: float = 0.95
    rho_danger_threshold: float = 0.99
    candidate_actions: tuple[Action, ...] | None = None  # None = default list

    def __post_init__(self):
        if not 0 < self.rho_safe_threshold <= self.rho_danger_threshold:
            raise ValueError("need 0 < safe threshold <= danger threshold")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be positive")


def default_candidates(model: GridModel, max_candidates: int = 200) -> tuple[Action, ...]:
    """Unitary reconfigurations of the busiest substations, by attached
    thermal capacity, truncated to max_candidates."""
    capacity = {s.id: 0.0 for s in model.substations}
    for line in model.lines:
        capacity[line.from_sub] += line.thermal_limit
        capacity[line.to_sub] += line.thermal_limit
    order = sorted(capacity, key=lambda sid: (-capacity[sid], sid))
    rank = {sid: i for i, sid in enumerate(order)}
    actions = enumerate_unitary_topology_actions(model)
    actions.sort(key=lambda a: rank[a.sub_reconfig.sub_id])
    return tuple(actions[:max_candidates])


def _reconnectable(obs, model: GridModel) -> list[Action]:
    """Reconnect actions for every line free of cooldowns and forced outages,
    lowest id first, back onto the reference busbars."""
    out = []
    for li in range(len(model.lines)):
        if (not obs.line_status[li] and obs.line_cooldown[li] == 0
                and obs.forced_outage_remaining[li] == 0):
            out.append(Action(line_set=LineSet(model.lines[li].id, 1, 1, 1)))
    return out


def _reference_resets(obs, model: GridModel) -> list[Action]:
    """One reset-to-busbar-1 action per substation that still has a live
    element on busbar 2 and no pending cooldown."""
    out = []
    for sub_pos, sub in enumerate(model.substations):
        if obs.sub_cooldown[sub_pos] > 0:
            continue
        for ref in sub.element_ids:
            if ref.kind in ("line_from", "line_to"):
                li = model.line_index[ref.element_id]
                if not obs.line_status[li]:
                    continue  # open line ends are electrically idle
            if obs.topo_vect[model.element_index[ref]] == 2:
                out.append(Action(sub_reconfig=SubReconfig(sub.id, (1,) * len(sub.element_ids))))
                break
    return out


class DoNothingAgent:
    name = "do_nothing"

    def act(self, obs, env) -> Action:
        return DO_NOTHING


class ReconnectAgent:
    """Reconnect the lowest-id reconnectable line; otherwise do nothing."""

    name = "reconnect"

    def act(self, obs, env) -> Action:
        candidates = _reconnectable(obs, env.model)
        return candidates[0] if candidates else DO_NOTHING


class GreedySimAgent:
    """Pick the candidate minimizing the simulated max loading.

    Above the safe threshold every legal candidate plus do-nothing is
    simulated and the argmin wins; ties keep do-nothing, then earlier
    candidate order.  Below it the search is skipped: disconnected lines are
    offered for reconnection (simulation-guarded), and substations left off
    the reference configuration are reset one at a time, so the grid does not
    drift into a shape that is fragile to the next outage.
    """

    name = "greedy_sim"

    def __init__(self, model: GridModel, cfg: GreedyConfig | None = None):
        self.cfg = cfg or GreedyConfig()
        if self.cfg.candidate_actions is not None:
            self.candidates = self.cfg.candidate_actions
        else:
            self.candidates = default_candidates(model, self.cfg.max_candidates)

    def act(self, obs, env) -> Action:
        calm = float(np.max(obs.rho)) < self.cfg.rho_safe_threshold if obs.rho.size else True
        reconnects = _reconnectable(obs, env.model)
        if not calm:
            return self._argmin(list(reconnects) + list(self.candidates), obs, env)
        if reconnects:
            choice = self._argmin(reconnects, obs, env)
            if choice is not DO_NOTHING:
                return choice
        for action in _reference_resets(obs, env.model):
            result = env.simulate(action)
            rho = float(np.max(result.observation.rho)) if result.observation.rho.size else 0.0
            if not result.done and rho < self.cfg.rho_danger_threshold:
                return action
        return DO_NOTHING

    def _argmin(self, pool, obs, env) -> Action:
        best = DO_NOTHING
        best_rho = self._simulated_max_rho(DO_NOTHING, env)
        for action in pool:
            if not self._legal(action, obs, env):
                continue
            score = self._simulated_max_rho(action, env)
            if score < best_rho:
                best, best_rho = action, score
        return best

    def _legal(self, action: Action, obs, env) -> bool:
        from .rules import check_legal

        probe = env.state.copy()
        probe.t += 1
        return check_legal(action, probe, env.model, env.rules).legal

    @staticmethod
    def _simulated_max_rho(action: Action, env) -> float:
        result = env.simulate(action)
        if result.done and result.info["done_reason"] != "horizon_reached":
            return float("inf")
        return float(np.max(result.observation.rho)) if result.observation.rho.size else 0.0


class ExpertRulesAgent:
    """Rule cascade: recover toward the reference topology when the grid is
    calm, do nothing when calm and already nominal, reconnect under stress,
    and fall back to the greedy search."""

    name = "expert_rules"

    def __init__(self, model: GridModel, cfg: GreedyConfig | None = None):
        self.cfg = cfg or GreedyConfig()
        self._greedy = GreedySimAgent(model, self.cfg)

    def act(self, obs, env) -> Action:
        model = env.model
        max_rho = float(np.max(obs.rho)) if obs.rho.size else 0.0
        if max_rho < self.cfg.rho_safe_threshold:
            recovery = _reconnectable(obs, model) + _reference_resets(obs, model)
            for action in recovery:
                result = env.simulate(action)
                rho = float(np.max(result.observation.rho)) if result.observation.rho.size else 0.0
                if not result.done and rho < self.cfg.rho_danger_threshold:
                    return action
            return DO_NOTHING
        reconnects = _reconnectable(obs, model)
        if reconnects:
            return reconnects[0]
        return self._greedy._argmin(list(self._greedy.candidates), obs, env)


def make_agent(name: str, model: GridModel, cfg: GreedyConfig | None = None):
    factories = {
        "do_nothing": lambda: DoNothingAgent(),
        "reconnect": lambda: ReconnectAgent(),
        "expert_rules": lambda: ExpertRulesAgent(model, cfg),
        "greedy_sim": lambda: GreedySimAgent(model, cfg),
    }
    if name not in factories:
        raise ValueError(f"unknown agent {name!r}; choose from {sorted(factories)}")
    return factories[name]()
