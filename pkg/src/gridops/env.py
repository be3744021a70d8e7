"""Agent-facing sequential environment: reset, step, and pure one-step simulate.

Time convention: reset solves frame 0; the k-th step call advances t to k and
solves frame k.  On a T-frame scenario the T-th call finds no frame T and
terminates with horizon_reached.  survived_steps equals state.t at done: the
number of frames actually served.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import chronics as chron
from .actions import DO_NOTHING, Action, validate_action
from .encoding import encode_observation, observation_digest, state_digest
from .exceptions import EnvUsageError, GridFormatError
from .model import GridModel, TopologyState
from .powerflow import InjectionSet, PowerFlowSolution, SolverConfig
from .rules import (
    REASON_HORIZON,
    REASON_NONE,
    EnvState,
    Legality,
    OpponentConfig,
    OpponentState,
    RulesConfig,
    apply_action,
    apply_maintenance,
    apply_redispatch,
    check_legal,
    opponent_step,
    resolve_step_physics,
    tick_cooldowns,
)
from .scoring import CostConfig, StepCost, blackout_tail_cost, step_cost

DISCONNECTED = -1  # topo_vect sentinel for the ends of open lines


@dataclass(frozen=True)
class Observation:
    t: int
    month: int
    dow: int
    hour: int
    minute: int
    rho: np.ndarray
    line_status: np.ndarray
    topo_vect: np.ndarray
    prod_p: np.ndarray
    load_p: np.ndarray
    load_q: np.ndarray
    line_cooldown: np.ndarray
    sub_cooldown: np.ndarray
    forced_outage_remaining: np.ndarray
    last_action_legal: bool


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: dict


def survival_reward(prev_state: EnvState, action: Action, new_state: EnvState,
                    solution: PowerFlowSolution | None) -> float:
    """1 per survived step; the step that ends in a blackout pays 0."""
    if new_state.done and new_state.done_reason != REASON_HORIZON:
        return 0.0
    return 1.0


RewardFn = Callable[[EnvState, Action, EnvState, PowerFlowSolution | None], float]


class Environment:
    """One episode driver over a model + scenario pair.

    Single-threaded per instance; all randomness (the opponent) derives from
    the seeds passed at construction/reset, so trajectories are reproducible
    bit for bit.
    """

    def __init__(self, model: GridModel, chronics: chron.ScenarioChronics,
                 rules: RulesConfig | None = None,
                 opponent: OpponentConfig | None = None,
                 cost: CostConfig | None = None,
                 solver: SolverConfig | None = None,
                 reward_fn: RewardFn | None = None,
                 seed: int = 0):
        self.model = model
        self.chronics = chron.bind(chronics, model)
        self.rules = rules or RulesConfig()
        self.opponent = opponent or OpponentConfig()
        self.cost = cost or CostConfig()
        self.solver = solver or SolverConfig()
        self.reward_fn = reward_fn or survival_reward
        self._seed = seed
        for lid in self.opponent.attackable_lines:
            if lid not in model.line_index:
                raise GridFormatError(f"attackable line {lid!r} is not in the grid")
        self.state: EnvState | None = None
        self._opp: OpponentState | None = None
        self._last_solution: PowerFlowSolution | None = None
        self._last_rho = np.zeros(len(model.lines))
        self._last_inj: InjectionSet | None = None
        self._last_legal = True

    # ---- lifecycle -------------------------------------------------------

    @property
    def step_count(self) -> int:
        return self.chronics.step_count

    @property
    def done(self) -> bool:
        return self.state is None or self.state.done

    def reset(self, seed: int | None = None) -> Observation:
        if seed is not None:
            self._seed = seed
        self.state = EnvState.initial(self.model)
        self._opp = OpponentState(
            rng=np.random.default_rng([self.opponent.seed & 0xFFFFFFFF, self._seed & 0xFFFFFFFF])
        )
        self._last_legal = True
        apply_maintenance(self.state, self.chronics.maintenance, self.model)
        inj = self._injections(0)
        sol, trips, rho = resolve_step_physics(self.model, self.state, inj, self.rules, self.solver)
        self._last_solution = sol
        self._last_rho = rho
        self._last_inj = inj
        return self._observe(self.state, sol, rho, inj, True)

    def step(self, action: Action) -> StepResult:
        self._require_live()
        state = self.state
        validate_action(action, self.model)
        prev = state.copy()
        t_new = state.t + 1
        state.t = t_new
        verdict = check_legal(action, state, self.model, self.rules)
        effective = action if verdict.legal else DO_NOTHING
        tick_cooldowns(state)

        if t_new == self.chronics.step_count:
            state.done = True
            state.done_reason = REASON_HORIZON
            reward = self.reward_fn(prev, action, state, self._last_solution)
            obs = self._observe(state, self._last_solution, self._last_rho, self._last_inj, verdict.legal)
            info = self._info(state, verdict, StepCost(), [], None, [], False)
            self._last_legal = verdict.legal
            return StepResult(obs, reward, True, info)

        applied_ok = apply_action(effective, state, self.model, self.rules)
        if not applied_ok:
            verdict = Legality(False, verdict.reasons + ("forced_outage",))
        sched = self.chronics.gen_p[t_new]
        applied, infeasible = apply_redispatch(effective.redispatch, state, self.model, sched)
        state.redispatch_offset = state.redispatch_offset + applied
        maint = apply_maintenance(state, self.chronics.maintenance, self.model)
        attack = opponent_step(state, self._opp, self._last_rho, self.opponent, self.model)

        inj = self._injections(t_new)
        sol, trips, rho = resolve_step_physics(self.model, state, inj, self.rules, self.solver)
        self._last_solution = sol
        self._last_rho = rho
        self._last_inj = inj
        self._last_legal = verdict.legal

        cost = self._step_cost(state, sol)
        reward = self.reward_fn(prev, action, state, sol)
        obs = self._observe(state, sol, rho, inj, verdict.legal)
        info = self._info(state, verdict, cost, trips, attack, maint, infeasible)
        return StepResult(obs, reward, state.done, info)

    def simulate(self, action: Action) -> StepResult:
        """Hypothetical step: forecast injections, no opponent, no mutation."""
        self._require_live()
        validate_action(action, self.model)
        state = self.state.copy()
        t_new = state.t + 1
        state.t = t_new
        verdict = check_legal(action, state, self.model, self.rules)
        effective = action if verdict.legal else DO_NOTHING
        tick_cooldowns(state)

        if t_new == self.chronics.step_count:
            state.done = True
            state.done_reason = REASON_HORIZON
            reward = self.reward_fn(self.state, action, state, self._last_solution)
            obs = self._observe(state, self._last_solution, self._last_rho, self._last_inj, verdict.legal)
            info = self._info(state, verdict, StepCost(), [], None, [], False)
            return StepResult(obs, reward, True, info)

        applied_ok = apply_action(effective, state, self.model, self.rules)
        if not applied_ok:
            verdict = Legality(False, verdict.reasons + ("forced_outage",))
        forecast = chron.forecast_at(self.chronics, state.t - 1)
        applied, infeasible = apply_redispatch(effective.redispatch, state, self.model, forecast.gen_p)
        state.redispatch_offset = state.redispatch_offset + applied
        maint = apply_maintenance(state, self.chronics.maintenance, self.model)

        inj = InjectionSet(
            gen_p=forecast.gen_p + state.redispatch_offset,
            gen_v=forecast.gen_v,
            load_p=forecast.load_p,
            load_q=forecast.load_q,
        )
        sol, trips, rho = resolve_step_physics(self.model, state, inj, self.rules, self.solver)
        cost = self._step_cost(state, sol)
        reward = self.reward_fn(self.state, action, state, sol)
        obs = self._observe(state, sol, rho, inj, verdict.legal)
        info = self._info(state, verdict, cost, trips, None, maint, infeasible)
        return StepResult(obs, reward, state.done, info)

    # ---- helpers ---------------------------------------------------------

    def state_digest(self) -> str:
        self._require_state()
        return state_digest(self.state)

    def observation(self) -> Observation:
        self._require_state()
        return self._observe(self.state, self._last_solution, self._last_rho,
                             self._last_inj, self._last_legal)

    def _require_state(self):
        if self.state is None:
            raise EnvUsageError("environment not reset")

    def _require_live(self):
        self._require_state()
        if self.state.done:
            raise EnvUsageError(f"episode is over ({self.state.done_reason}); call reset")

    def _injections(self, t: int) -> InjectionSet:
        frame = chron.frame_at(self.chronics, t)
        return InjectionSet(
            gen_p=frame.gen_p + self.state.redispatch_offset,
            gen_v=frame.gen_v,
            load_p=frame.load_p,
            load_q=frame.load_q,
        )

    def _step_cost(self, state: EnvState, sol: PowerFlowSolution | None) -> StepCost:
        if state.done and state.done_reason != REASON_HORIZON:
            tail = blackout_tail_cost(self.chronics.load_p, state.t, self.cost)
            return StepCost(blackout_cost=tail)
        if sol is None:
            return StepCost()
        return step_cost(sol.losses, state.redispatch_offset, self.model, self.cost)

    def _observe(self, state: EnvState, sol: PowerFlowSolution | None, rho: np.ndarray,
                 inj: InjectionSet | None, legal: bool) -> Observation:
        model = self.model
        n_lines = len(model.lines)
        month, dow, hour, minute = chron.calendar_at(self.chronics, state.t)
        topo_vect = state.topo.element_bus.astype(np.int8).copy()
        open_lines = ~state.topo.line_status
        topo_vect[:n_lines][open_lines] = DISCONNECTED
        topo_vect[n_lines:2 * n_lines][open_lines] = DISCONNECTED
        blackout = state.done and state.done_reason != REASON_HORIZON and state.done_reason != REASON_NONE
        if inj is None or (blackout and sol is None):
            prod_p = np.zeros(len(model.generators))
            load_p = np.zeros(len(model.loads)) if inj is None else inj.load_p.copy()
            load_q = np.zeros(len(model.loads)) if inj is None else inj.load_q.copy()
        else:
            prod_p = inj.gen_p.copy()
            if sol is not None:
                prod_p[model.slack_gen_pos] += sol.p_slack
            load_p = inj.load_p.copy()
            load_q = inj.load_q.copy()
        return Observation(
            t=state.t,
            month=month,
            dow=dow,
            hour=hour,
            minute=minute,
            rho=rho.copy(),
            line_status=state.topo.line_status.copy(),
            topo_vect=topo_vect,
            prod_p=prod_p,
            load_p=load_p,
            load_q=load_q,
            line_cooldown=state.line_cooldown.copy(),
            sub_cooldown=state.sub_cooldown.copy(),
            forced_outage_remaining=np.maximum(state.forced_outage_until - state.t, 0),
            last_action_legal=legal,
        )

    def _info(self, state: EnvState, verdict: Legality, cost: StepCost, trips, attack, maint, infeasible) -> dict:
        return {
            "done_reason": state.done_reason,
            "illegal_action": not verdict.legal,
            "illegal_reasons": verdict.reasons,
            "cascade_trips": list(trips),
            "opponent_attack": attack,
            "maintenance_started": list(maint),
            "redispatch_infeasible": infeasible,
            "cost": cost,
        }

    def encoded_observation(self) -> np.ndarray:
        return encode_observation(self.observation(), self.model)

    def observation_digest(self) -> str:
        return observation_digest(self.encoded_observation())
