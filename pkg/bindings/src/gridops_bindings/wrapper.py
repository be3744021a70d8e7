"""Flat-array face of the simulator for agent frameworks.

``make(config_path)`` builds a :class:`WrappedEnv` from the same JSON config
the CLI understands: a ``grid`` path, exactly one entry under ``scenarios``,
a ``seed``, and the optional ``rules``/``opponent``/``cost``/``solver``
sections.  Observations and actions cross the boundary as float64 vectors in
the canonical layouts published by ``gridops.encoding``, so a wrapped
trajectory is bit-identical to one driven through the environment directly.

One wrapped environment per interpreter thread; handles are never shared.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from gridops.actions import Action
from gridops.chronics import load_scenario
from gridops.encoding import (
    action_layout,
    action_size,
    decode_action,
    encode_observation,
    observation_layout,
    observation_size,
    observation_view,
)
from gridops.env import Environment
from gridops.model import GridModel, load_grid
from gridops.powerflow import SolverConfig
from gridops.rules import OpponentConfig, RulesConfig
from gridops.scoring import CostConfig


class BindingsError(Exception):
    """Bad wrapper configuration or a malformed flat vector."""


@dataclass(frozen=True)
class SpaceDescriptor:
    """Shape, elementwise bounds, and named slices of one flat vector."""

    shape: tuple[int, ...]
    low: np.ndarray
    high: np.ndarray
    # (name, offset, length) in vector order
    fields: tuple[tuple[str, int, int], ...]

    def slice_of(self, name: str) -> slice:
        for field, offset, size in self.fields:
            if field == name:
                return slice(offset, offset + size)
        raise KeyError(name)


def _observation_space(model: GridModel) -> SpaceDescriptor:
    fields = observation_layout(model)
    n = observation_size(model)
    low = np.full(n, -np.inf)
    high = np.full(n, np.inf)
    bounds = {
        "rho": (0.0, np.inf),
        "line_status": (0.0, 1.0),
        "topo_vect": (-1.0, 2.0),
        "line_cooldown": (0.0, np.inf),
        "sub_cooldown": (0.0, np.inf),
        "forced_outage_remaining": (0.0, np.inf),
        "last_action_legal": (0.0, 1.0),
    }
    for name, offset, size in fields:
        if name in bounds:
            lo, hi = bounds[name]
            low[offset:offset + size] = lo
            high[offset:offset + size] = hi
    # header: t, month, dow, hour, minute
    low[0:5] = [0.0, 1.0, 0.0, 0.0, 0.0]
    high[1:5] = [12.0, 6.0, 23.0, 55.0]
    return SpaceDescriptor((n,), low, high, fields)


def _action_space(model: GridModel) -> SpaceDescriptor:
    n = action_size(model)
    low = np.zeros(n)
    high = np.zeros(n)
    high[: model.n_elements] = 2.0  # set_bus: 0 untouched, else busbar 1/2
    base = model.n_elements
    high[base] = float(len(model.lines))  # line slot, 0 = none
    low[base + 1], high[base + 1] = -1.0, 1.0
    high[base + 2] = 2.0
    high[base + 3] = 2.0
    for k, g in enumerate(model.dispatchable_gens):
        gen = model.generators[g]
        low[base + 4 + k] = -gen.ramp_down
        high[base + 4 + k] = gen.ramp_up
    return SpaceDescriptor((n,), low, high, action_layout(model))


class WrappedEnv:
    """A primary environment behind flat observation/action arrays."""

    def __init__(self, model: GridModel, chronics, *,
                 rules: RulesConfig | None = None,
                 opponent: OpponentConfig | None = None,
                 cost: CostConfig | None = None,
                 solver: SolverConfig | None = None,
                 seed: int = 0):
        self.model = model
        self.env = Environment(model, chronics, rules=rules, opponent=opponent,
                               cost=cost, solver=solver, seed=seed)
        self.observation_space = _observation_space(model)
        self.action_space = _action_space(model)

    def wrapped_reset(self) -> np.ndarray:
        return encode_observation(self.env.reset(), self.model)

    def wrapped_step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        result = self.env.step(self._decode(action))
        return (encode_observation(result.observation, self.model),
                result.reward, result.done, result.info)

    def wrapped_simulate(self, action) -> tuple[np.ndarray, float, bool, dict]:
        """Forecast preview of an action; never advances the environment."""
        result = self.env.simulate(self._decode(action))
        return (encode_observation(result.observation, self.model),
                result.reward, result.done, result.info)

    def view(self, observation) -> dict[str, np.ndarray]:
        """Named slices of a flat observation; views, not copies."""
        vec = np.asarray(observation)
        expected = self.observation_space.shape[0]
        if vec.shape != (expected,):
            raise BindingsError(
                f"observation vector has length {vec.size}, expected {expected}"
            )
        return observation_view(vec, self.model)

    def state_digest(self) -> str:
        return self.env.state_digest()

    def _decode(self, action) -> Action:
        vec = np.asarray(action, dtype=float)
        expected = self.action_space.shape[0]
        if vec.shape != (expected,):
            raise BindingsError(
                f"action vector has length {vec.size}, expected {expected}"
            )
        return decode_action(vec, self.model)


def _build(cls, config: dict, key: str):
    raw = dict(config.get(key, {}))
    if key == "opponent" and "attackable_lines" in raw:
        raw["attackable_lines"] = tuple(raw["attackable_lines"])
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise BindingsError(f"bad {key} section: {exc}") from exc


def make(config_path: str) -> WrappedEnv:
    """Build a wrapped environment from a CLI-style JSON config file."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BindingsError(f"cannot read config {config_path}: {exc}") from exc
    if not isinstance(config, dict):
        raise BindingsError("config file must hold a JSON object")
    grid = config.get("grid")
    if grid is None:
        raise BindingsError("config needs a 'grid' path")
    scenarios = config.get("scenarios", [])
    if not isinstance(scenarios, list) or len(scenarios) != 1:
        raise BindingsError(
            f"config must list exactly one scenario directory, got {scenarios!r}"
        )
    model = load_grid(grid)
    chronics = load_scenario(scenarios[0], model)
    return WrappedEnv(
        model, chronics,
        rules=_build(RulesConfig, config, "rules"),
        opponent=_build(OpponentConfig, config, "opponent"),
        cost=_build(CostConfig, config, "cost"),
        solver=_build(SolverConfig, config, "solver"),
        seed=int(config.get("seed", 0)),
    )
