"""Shared fixtures: packaged grids plus small hand-built networks whose
power flow solutions are derivable by hand (used as oracles)."""
import importlib.resources as resources

import numpy as np
import pytest

from gridops.chronics import ScenarioChronics
from gridops.model import GridModel, load_grid, parse_grid


def data_path(name: str) -> str:
    return str(resources.files("gridops").joinpath(f"data/{name}"))


@pytest.fixture(scope="session")
def case2() -> GridModel:
    return load_grid(data_path("case2.json"))


@pytest.fixture(scope="session")
def case5() -> GridModel:
    return load_grid(data_path("case5.json"))


@pytest.fixture(scope="session")
def case118() -> GridModel:
    return load_grid(data_path("case118.json"))


def _gen(gid, sub, p_max, *, p_min=0.0, ramp=None, cost=40.0, kind="thermal", dispatchable=True):
    return {
        "id": gid, "sub_id": sub, "p_min": p_min, "p_max": p_max,
        "ramp_up": ramp if ramp is not None else p_max / 10.0,
        "ramp_down": ramp if ramp is not None else p_max / 10.0,
        "cost": cost, "kind": kind, "dispatchable": dispatchable,
    }


def _line(lid, a, b, x, *, r=0.0, charge=0.0, limit=1e9):
    return {"id": lid, "from_sub": a, "to_sub": b, "r": r, "x": x, "b": charge,
            "thermal_limit": limit}


def triangle_grid(limits=(1e9, 1e9, 1e9)) -> GridModel:
    """Three buses in a triangle, equal reactance, one generator, one load.

    With 90 MW injected at sub_000 and drawn at sub_002, superposition
    gives 30 MW on each leg of the two-hop path and 60 MW on the direct line.
    """
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": f"sub_{i:03d}"} for i in range(3)],
        "lines": [
            _line("line_000", "sub_000", "sub_001", 0.1, limit=limits[0]),
            _line("line_001", "sub_001", "sub_002", 0.1, limit=limits[1]),
            _line("line_002", "sub_000", "sub_002", 0.1, limit=limits[2]),
        ],
        "generators": [_gen("gen_000", "sub_000", 200.0)],
        "loads": [{"id": "load_000", "sub_id": "sub_002"}],
    })


def parallel_grid() -> GridModel:
    """Two identical lines between two buses: flow splits evenly."""
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": "sub_000"}, {"id": "sub_001"}],
        "lines": [
            _line("line_000", "sub_000", "sub_001", 0.08, limit=100.0),
            _line("line_001", "sub_000", "sub_001", 0.08, limit=100.0),
        ],
        "generators": [_gen("gen_000", "sub_000", 200.0)],
        "loads": [{"id": "load_000", "sub_id": "sub_001"}],
    })


def two_bus_pv_grid() -> GridModel:
    """Lossless line between two voltage-holding buses (slack + PV)."""
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": "sub_000"}, {"id": "sub_001"}],
        "lines": [_line("line_000", "sub_000", "sub_001", 0.2)],
        "generators": [_gen("gen_000", "sub_000", 200.0), _gen("gen_001", "sub_001", 100.0)],
        "loads": [{"id": "load_000", "sub_id": "sub_001"}],
    })


def two_bus_pq_grid() -> GridModel:
    """Lossless line feeding a PQ load bus from the slack."""
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": "sub_000"}, {"id": "sub_001"}],
        "lines": [_line("line_000", "sub_000", "sub_001", 0.1)],
        "generators": [_gen("gen_000", "sub_000", 200.0)],
        "loads": [{"id": "load_000", "sub_id": "sub_001"}],
    })


def cascade_grid() -> GridModel:
    """Three parallel corridors with staged limits.

    Admittances 10 : 5 : 2.5 split a 90 MW transfer as 4/7 : 2/7 : 1/7,
    i.e. 51.43 / 25.71 / 12.86 MW.  Limits 25 / 30 / 42 stage a hard-trip
    chain: line_000 at rho 2.06 trips, dumping 60 MW on line_001 (rho 2.0),
    whose trip dumps all 90 MW on line_002 (rho 2.14); the last trip strands
    the load.
    """
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": "sub_000"}, {"id": "sub_001"}],
        "lines": [
            _line("line_000", "sub_000", "sub_001", 0.1, limit=25.0),
            _line("line_001", "sub_000", "sub_001", 0.2, limit=30.0),
            _line("line_002", "sub_000", "sub_001", 0.4, limit=42.0),
        ],
        "generators": [_gen("gen_000", "sub_000", 200.0, ramp=50.0)],
        "loads": [{"id": "load_000", "sub_id": "sub_001"}],
    })


def redispatch_grid() -> GridModel:
    """Three dispatchable units with distinct ramp limits for clipping and
    compensation arithmetic."""
    return parse_grid({
        "base_mva": 100.0,
        "substations": [{"id": "sub_000"}, {"id": "sub_001"}],
        "lines": [_line("line_000", "sub_000", "sub_001", 0.1, limit=1e9)],
        "generators": [
            _gen("gen_000", "sub_000", 100.0, ramp=5.0, cost=10.0),
            _gen("gen_001", "sub_000", 100.0, ramp=15.0, cost=20.0),
            _gen("gen_002", "sub_001", 100.0, ramp=10.0, cost=30.0),
        ],
        "loads": [{"id": "load_000", "sub_id": "sub_001"}],
    })


def constant_chronics(model: GridModel, steps: int, demand: float,
                      maintenance=(), scenario_id="const") -> ScenarioChronics:
    """Flat series: demand split evenly over loads, dispatch proportional to
    capacity.  No forecast columns, so forecasts fall back to persistence and
    simulate matches step exactly."""
    n_l, n_g = len(model.loads), len(model.generators)
    load_p = np.full((steps, n_l), demand / n_l)
    gen_share = model.gen_p_max / model.gen_p_max.sum()
    gen_p = np.tile(gen_share * demand, (steps, 1))
    return ScenarioChronics(
        id=scenario_id, step_count=steps, dt=5,
        load_ids=tuple(l.id for l in model.loads),
        gen_ids=tuple(g.id for g in model.generators),
        load_p=load_p, load_q=np.zeros((steps, n_l)),
        gen_p=gen_p, gen_v=np.ones((steps, n_g)),
        forecast_load_p=None, forecast_gen_p=None,
        maintenance=tuple(maintenance),
    )


def ramp_chronics(model: GridModel, profile, scenario_id="ramp") -> ScenarioChronics:
    """Total demand follows `profile` (one value per step); same splits as
    constant_chronics."""
    profile = np.asarray(profile, dtype=float)
    steps = len(profile)
    n_l, n_g = len(model.loads), len(model.generators)
    load_p = np.tile(profile[:, None] / n_l, (1, n_l))
    gen_share = model.gen_p_max / model.gen_p_max.sum()
    gen_p = profile[:, None] * gen_share[None, :]
    return ScenarioChronics(
        id=scenario_id, step_count=steps, dt=5,
        load_ids=tuple(l.id for l in model.loads),
        gen_ids=tuple(g.id for g in model.generators),
        load_p=load_p, load_q=np.zeros((steps, n_l)),
        gen_p=gen_p, gen_v=np.ones((steps, n_g)),
        forecast_load_p=None, forecast_gen_p=None,
        maintenance=(),
    )
