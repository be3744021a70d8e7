"""Game rules: legality, redispatch balancing, overflow trips, cascades,
maintenance and the adversarial opponent.

All operations are deterministic functions of their inputs; the opponent's
randomness comes from an explicitly seeded generator owned by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actions import Action
from .model import GridModel, TopologyState, to_bus_branch
from .powerflow import InjectionSet, SolverConfig, loading, solve

REASON_NONE = "none"
REASON_HORIZON = "horizon_reached"
REASON_DIVERGENCE = "blackout_divergence"
REASON_LOAD_LOST = "blackout_load_lost"


@dataclass(frozen=True)
class RulesConfig:
    soft_overflow_steps: int = 3
    hard_overflow_rho: float = 2.0
    line_cooldown_steps: int = 3
    sub_cooldown_steps: int = 3
    overflow_reconnect_delay: int = 12
    max_cascade_depth: int = 30

    def __post_init__(self):
        if min(self.soft_overflow_steps, self.line_cooldown_steps, self.sub_cooldown_steps,
               self.overflow_reconnect_delay, self.max_cascade_depth) <= 0:
            raise ValueError("all rule counters must be positive")
        if not self.hard_overflow_rho > 1:
            raise ValueError("hard_overflow_rho must exceed 1")


@dataclass(frozen=True)
class OpponentConfig:
    enabled: bool = False
    attackable_lines: tuple[str, ...] = ()
    attack_duration: int = 48
    attack_cooldown: int = 144
    top_k: int = 5
    seed: int = 0
    attack_probability: float = 1.0 / 288.0

    def __post_init__(self):
        if self.attack_duration <= 0 or self.attack_cooldown <= 0 or self.top_k <= 0:
            raise ValueError("opponent durations and top_k must be positive")
        if not 0.0 <= self.attack_probability <= 1.0:
            raise ValueError("attack_probability must lie in [0, 1]")


@dataclass
class OpponentState:
    rng: np.random.Generator
    attack_until: int = 0
    next_allowed: int = 0

    def active(self, t: int) -> bool:
        return t < self.attack_until


@dataclass
class EnvState:
    topo: TopologyState
    t: int
    overflow_steps: np.ndarray  # per line, consecutive solves with rho > 1
    line_cooldown: np.ndarray  # steps before the line may be acted on again
    sub_cooldown: np.ndarray
    forced_outage_until: np.ndarray  # absolute step before which a line stays out
    redispatch_offset: np.ndarray  # cumulative applied MW per generator
    done: bool = False
    done_reason: str = REASON_NONE

    @staticmethod
    def initial(model: GridModel) -> "EnvState":
        return EnvState(
            topo=model.reference_topology(),
            t=0,
            overflow_steps=np.zeros(len(model.lines), dtype=np.int64),
            line_cooldown=np.zeros(len(model.lines), dtype=np.int64),
            sub_cooldown=np.zeros(len(model.substations), dtype=np.int64),
            forced_outage_until=np.zeros(len(model.lines), dtype=np.int64),
            redispatch_offset=np.zeros(len(model.generators), dtype=float),
        )

    def copy(self) -> "EnvState":
        return EnvState(
            topo=self.topo.copy(),
            t=self.t,
            overflow_steps=self.overflow_steps.copy(),
            line_cooldown=self.line_cooldown.copy(),
            sub_cooldown=self.sub_cooldown.copy(),
            forced_outage_until=self.forced_outage_until.copy(),
            redispatch_offset=self.redispatch_offset.copy(),
            done=self.done,
            done_reason=self.done_reason,
        )


@dataclass(frozen=True)
class Legality:
    legal: bool
    reasons: tuple[str, ...] = ()


def check_legal(action: Action, state: EnvState, model: GridModel, cfg: RulesConfig) -> Legality:
    """Game-rule legality of a structurally valid action in the current state."""
    reasons = []
    if action.sub_reconfig is not None:
        sub = model.sub_index[action.sub_reconfig.sub_id]
        if state.sub_cooldown[sub] > 0:
            reasons.append("sub_cooldown")
    if action.line_set is not None:
        line = model.line_index[action.line_set.line_id]
        if state.line_cooldown[line] > 0:
            reasons.append("line_cooldown")
        if state.forced_outage_until[line] > state.t:
            reasons.append("forced_outage")
    for gen_id in action.redispatch:
        idx = model.gen_index.get(gen_id)
        if idx is None or not model.generators[idx].dispatchable:
            reasons.append("non_dispatchable_redispatch")
            break
    return Legality(legal=not reasons, reasons=tuple(reasons))


def tick_cooldowns(state: EnvState) -> None:
    """Decrement all per-asset counters toward zero."""
    np.maximum(state.line_cooldown - 1, 0, out=state.line_cooldown)
    np.maximum(state.sub_cooldown - 1, 0, out=state.sub_cooldown)


def apply_action(action: Action, state: EnvState, model: GridModel, cfg: RulesConfig) -> bool:
    """Write a legal action into the topology and start fresh cooldowns.

    Returns False when a line reconnect had to be skipped because the line is
    (still) forced out at the state's current time; everything else applies.
    """
    ok = True
    if action.sub_reconfig is not None:
        sub_pos = model.sub_index[action.sub_reconfig.sub_id]
        refs = model.substations[sub_pos].element_ids
        for ref, bus in zip(refs, action.sub_reconfig.assignment):
            state.topo.element_bus[model.element_index[ref]] = bus
        state.sub_cooldown[sub_pos] = cfg.sub_cooldown_steps
    if action.line_set is not None:
        line = model.line_index[action.line_set.line_id]
        if action.line_set.status > 0:
            if state.forced_outage_until[line] > state.t:
                ok = False  # outage window started in the same step; outage wins
            else:
                state.topo.line_status[line] = True
                n_lines = len(model.lines)
                if action.line_set.bus_from is not None:
                    state.topo.element_bus[line] = action.line_set.bus_from
                if action.line_set.bus_to is not None:
                    state.topo.element_bus[n_lines + line] = action.line_set.bus_to
                state.line_cooldown[line] = cfg.line_cooldown_steps
        else:
            state.topo.line_status[line] = False
            state.overflow_steps[line] = 0
            state.line_cooldown[line] = cfg.line_cooldown_steps
    return ok


def apply_maintenance(state: EnvState, maintenance, model: GridModel) -> list[str]:
    """Force out lines whose window covers the state's current time."""
    out = []
    for line_id, start, end in maintenance:
        if start <= state.t < end:
            line = model.line_index[line_id]
            if state.topo.line_status[line]:
                out.append(line_id)
            state.topo.line_status[line] = False
            state.overflow_steps[line] = 0
            state.forced_outage_until[line] = max(state.forced_outage_until[line], end)
    return out


def apply_redispatch(requested, state: EnvState, model: GridModel, sched_p: np.ndarray):
    """Clip requested deltas and balance them against untargeted units.

    ``sched_p`` is the scheduled MW of every generator for the frame being
    entered.  Returns (applied array per generator, infeasible flag); the
    applied deltas sum to zero.  An infeasible compensation zeroes the whole
    redispatch part.
    """
    n = len(model.generators)
    applied = np.zeros(n)
    targets = {model.gen_index[g]: float(d) for g, d in requested.items() if float(d) != 0.0}
    if not targets:
        return applied, False

    base = sched_p + state.redispatch_offset
    for g, delta in targets.items():
        lo = max(-model.gen_ramp_down[g], model.gen_p_min[g] - base[g])
        hi = min(model.gen_ramp_up[g], model.gen_p_max[g] - base[g])
        applied[g] = min(max(delta, lo), hi)

    total = applied.sum()
    if abs(total) > 1e-12:
        others = [g for g in model.dispatchable_gens if g not in targets]
        head = np.zeros(n)
        for g in others:
            if total > 0:  # compensation lowers the others
                head[g] = min(model.gen_ramp_down[g], base[g] - model.gen_p_min[g])
            else:
                head[g] = min(model.gen_ramp_up[g], model.gen_p_max[g] - base[g])
        capacity = head.sum()
        if capacity + 1e-12 < abs(total):
            return np.zeros(n), True
        if capacity > 0:
            share = head / capacity
            applied -= total * share
    return applied, False


def resolve_step_physics(model: GridModel, state: EnvState, inj: InjectionSet,
                         rules_cfg: RulesConfig, solver_cfg: SolverConfig):
    """Solve, trip overloaded lines, and re-solve until stable or blacked out.

    Each sweep solves the network, then scans connected lines in ascending id
    order: rho >= hard_overflow_rho trips immediately, rho > 1 bumps the
    line's overflow counter (tripping at soft_overflow_steps), rho <= 1
    resets it.  Trips force the line out for overflow_reconnect_delay and
    trigger a re-solve within the same step.  Mutates ``state``; returns
    (solution or None, tripped line ids in order, per-line rho).
    """
    n_lines = len(model.lines)
    trips: list[str] = []
    depth = 0
    while True:
        net = to_bus_branch(model, state.topo)
        live = net.live_buses
        for bus in net.buses:
            if bus.loads and bus.index not in live:
                state.done = True
                state.done_reason = REASON_LOAD_LOST
                return None, trips, np.zeros(n_lines)
        sol = solve(net, inj, solver_cfg, model.base_mva)
        if not sol.converged:
            state.done = True
            state.done_reason = REASON_DIVERGENCE
            return None, trips, np.zeros(n_lines)
        rho = loading(sol, net)
        sweep = []
        for li in range(n_lines):
            if not state.topo.line_status[li]:
                continue
            if rho[li] >= rules_cfg.hard_overflow_rho:
                sweep.append(li)
            elif rho[li] > 1.0:
                state.overflow_steps[li] += 1
                if state.overflow_steps[li] >= rules_cfg.soft_overflow_steps:
                    sweep.append(li)
            else:
                state.overflow_steps[li] = 0
        if not sweep:
            return sol, trips, rho
        depth += 1
        if depth > rules_cfg.max_cascade_depth:
            state.done = True
            state.done_reason = REASON_DIVERGENCE
            return None, trips, np.zeros(n_lines)
        for li in sweep:
            state.topo.line_status[li] = False
            state.overflow_steps[li] = 0
            state.forced_outage_until[li] = max(
                int(state.forced_outage_until[li]), state.t + rules_cfg.overflow_reconnect_delay
            )
            trips.append(model.lines[li].id)


def opponent_step(state: EnvState, opp: OpponentState, rho: np.ndarray,
                  cfg: OpponentConfig, model: GridModel) -> str | None:
    """Maybe attack: force out one of the most-loaded attackable lines.

    The Bernoulli draw happens only on steps where an attack is possible (no
    active attack, cooldown elapsed), keeping trajectories deterministic per
    seed.  Returns the attacked line id, if any.
    """
    if not cfg.enabled:
        return None
    t = state.t
    if opp.active(t) or t < opp.next_allowed:
        return None
    if opp.rng.random() >= cfg.attack_probability:
        return None
    candidates = [
        model.line_index[lid] for lid in cfg.attackable_lines
        if state.topo.line_status[model.line_index[lid]]
    ]
    if not candidates:
        return None
    candidates.sort(key=lambda li: (-rho[li], model.lines[li].id))
    pool = candidates[: cfg.top_k]
    pick = pool[int(opp.rng.integers(len(pool)))]
    state.topo.line_status[pick] = False
    state.overflow_steps[pick] = 0
    state.forced_outage_until[pick] = max(int(state.forced_outage_until[pick]), t + cfg.attack_duration)
    opp.attack_until = t + cfg.attack_duration
    opp.next_allowed = t + cfg.attack_duration + cfg.attack_cooldown
    return model.lines[pick].id
