"""Operational-cost accounting and the normalized score mapping.

Costs per step: energy losses priced at energy_price, redispatch priced per
generator on the cumulative deviation, and after a blackout the remaining
demand priced at VOLL through the horizon.  Scores map cumulative cost onto
[-100, 100] through four per-scenario anchor costs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GridModel


@dataclass(frozen=True)
class CostConfig:
    energy_price: float = 70.0  # currency per MWh
    voll: float | None = None  # defaults to 10x energy_price
    dt_hours: float = 1.0 / 12.0

    def __post_init__(self):
        if self.voll is None:
            object.__setattr__(self, "voll", 10.0 * self.energy_price)
        if not self.energy_price > 0:
            raise ValueError("energy_price must be positive")
        if not self.voll > self.energy_price:
            raise ValueError("voll must exceed energy_price")
        if not self.dt_hours > 0:
            raise ValueError("dt_hours must be positive")


@dataclass(frozen=True)
class StepCost:
    loss_cost: float = 0.0
    redispatch_cost: float = 0.0
    blackout_cost: float = 0.0

    @property
    def total(self) -> float:
        return self.loss_cost + self.redispatch_cost + self.blackout_cost


def step_cost(losses_mw: float, redispatch_offset: np.ndarray, model: GridModel,
              cfg: CostConfig) -> StepCost:
    """Cost of one survived step given its solve and the standing offsets."""
    loss = losses_mw * cfg.energy_price * cfg.dt_hours
    redisp = float(np.abs(redispatch_offset) @ model.gen_cost) * cfg.dt_hours
    return StepCost(loss_cost=loss, redispatch_cost=redisp)


def blackout_tail_cost(load_p: np.ndarray, survived_steps: int, cfg: CostConfig) -> float:
    """VOLL charge on total demand for every step from game over to horizon."""
    remaining = load_p[survived_steps:]
    return float(remaining.sum() * cfg.voll * cfg.dt_hours)


@dataclass(frozen=True)
class ScoreAnchors:
    """Per-scenario anchor costs: blackout-at-start, do-nothing, reference
    completion, and the 20%-better-than-reference optimum."""

    c_blackout: float
    c_dn: float
    c_ref: float
    c_opt: float

    def __post_init__(self):
        # zero anchors are allowed: every normalize_score division sits on a
        # branch whose reachability already implies a positive denominator
        if not (self.c_blackout >= self.c_dn >= self.c_ref >= self.c_opt >= 0):
            raise ValueError(
                f"anchor ordering violated: blackout {self.c_blackout}, do-nothing {self.c_dn}, "
                f"reference {self.c_ref}, optimum {self.c_opt}"
            )

    @staticmethod
    def make(c_blackout: float, c_dn: float, c_ref: float, dn_completed: bool) -> "ScoreAnchors":
        """Clamp raw anchor costs into a valid ordering.

        When the do-nothing agent completes the scenario its cost IS the
        reference: the [0, 80] segment collapses and completing scores >= 80.
        """
        if dn_completed:
            c_ref = c_dn
        c_ref = min(c_ref, c_dn)
        c_blackout = max(c_blackout, c_dn)
        return ScoreAnchors(c_blackout=c_blackout, c_dn=c_dn, c_ref=c_ref, c_opt=0.8 * c_ref)


def normalize_score(agent_cost: float, anchors: ScoreAnchors) -> float:
    """Piecewise-linear, monotone non-increasing map onto [-100, 100].

    Hits -100 / 0 / 80 / 100 exactly at the four anchors.  Degenerate
    (equal-anchor) segments collapse toward the higher score.
    """
    cb, cd, cr, co = anchors.c_blackout, anchors.c_dn, anchors.c_ref, anchors.c_opt
    c = agent_cost
    if c <= co:
        return 100.0
    # ratios are grouped so that at an anchor x/x is exactly 1 and the
    # result never strays outside [-100, 100] by a rounding step
    if c <= cr:  # here cr >= c > co, so cr > co
        return 80.0 + 20.0 * ((cr - c) / (cr - co))
    if c <= cd:
        return 80.0 * ((cd - c) / (cd - cr))
    if c <= cb:
        return -100.0 * ((c - cd) / (cb - cd))
    return -100.0
