"""Build the case118 fixture: 118 substations, 186 lines, 54 generators,
99 loads, written to src/gridops/data/case118.json.

The graph is a ring through all substations plus chords.  Three hub
substations carry enough attached elements (17, 15, 13) that the unitary
reconfiguration count clears 70,000 on its own.  Thermal limits are sized
from DC snapshots so the network runs uncongested at nominal demand.

Deterministic: fixed RNG seed, no wall-clock input.  Rerunning reproduces
the same JSON byte for byte.
"""
from __future__ import annotations

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gridops.model import count_unitary_topology_actions, parse_grid, serialize_grid, to_bus_branch
from gridops.powerflow import DC, InjectionSet, SolverConfig, solve

SEED = 118
N_SUBS = 118
N_LINES = 186
N_GENS = 54
N_LOADS = 99

HUB_CHORD_ENDS = {
    0: [9, 18, 27, 36, 45, 54, 63, 72, 81, 90, 99, 108],
    1: [14, 25, 36, 47, 58, 69, 80, 91, 102, 113],
    2: [16, 30, 44, 58, 72, 86, 100, 114],
}

# kinds for the 48 non-hub generators, cycled; dispatchable mix dominates
KIND_CYCLE = [
    "thermal", "wind", "hydro", "solar",
    "thermal", "wind", "nuclear", "solar",
    "thermal", "wind", "hydro", "solar",
]
KIND_PMAX = {
    "thermal": (120.0, 280.0),
    "nuclear": (300.0, 380.0),
    "hydro": (90.0, 180.0),
    "wind": (80.0, 160.0),
    "solar": (50.0, 130.0),
}
KIND_COST = {"thermal": (30.0, 45.0), "nuclear": (10.0, 12.0), "hydro": (15.0, 25.0),
             "wind": (0.0, 0.0), "solar": (0.0, 0.0)}
DISPATCHABLE = {"thermal", "nuclear", "hydro"}

TARGET_DISPATCH_PMAX = 5200.0
TARGET_RENEWABLE_PMAX = 3000.0


def build_lines(rng: np.random.Generator) -> list[dict]:
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()

    def add(a: int, b: int) -> bool:
        key = (min(a, b), max(a, b))
        if a == b or key in seen:
            return False
        seen.add(key)
        edges.append((a, b))
        return True

    for i in range(N_SUBS):
        add(i, (i + 1) % N_SUBS)
    for hub, ends in HUB_CHORD_ENDS.items():
        for far in ends:
            assert add(hub, far), (hub, far)
    while len(edges) < N_LINES:
        a, b = rng.integers(3, N_SUBS, size=2)
        add(int(a), int(b))

    lines = []
    for idx, (a, b) in enumerate(edges):
        ring = idx < N_SUBS
        x = float(rng.uniform(0.04, 0.12) if ring else rng.uniform(0.08, 0.22))
        lines.append({
            "id": f"line_{idx:03d}",
            "from_sub": f"sub_{a:03d}",
            "to_sub": f"sub_{b:03d}",
            "r": round(float(rng.uniform(0.008, 0.035)), 5),
            "x": round(x, 5),
            "b": round(float(rng.uniform(0.01, 0.05)), 5),
            "thermal_limit": 1.0,  # provisional, sized from DC snapshots below
        })
    return lines


def build_generators(rng: np.random.Generator) -> list[dict]:
    specs: list[tuple[int, str, float]] = [
        (0, "thermal", 500.0),
        (0, "hydro", 150.0),
        (1, "thermal", 300.0),
        (1, "wind", 120.0),
        (2, "thermal", 300.0),
        (2, "solar", 100.0),
    ]
    host_subs = rng.choice(np.arange(3, N_SUBS), size=N_GENS - len(specs), replace=False)
    for i, sub in enumerate(sorted(int(s) for s in host_subs)):
        kind = KIND_CYCLE[i % len(KIND_CYCLE)]
        lo, hi = KIND_PMAX[kind]
        specs.append((sub, kind, float(rng.uniform(lo, hi))))

    disp_total = sum(p for _, k, p in specs if k in DISPATCHABLE)
    ren_total = sum(p for _, k, p in specs if k not in DISPATCHABLE)
    f_disp = TARGET_DISPATCH_PMAX / disp_total
    f_ren = TARGET_RENEWABLE_PMAX / ren_total

    gens = []
    for idx, (sub, kind, p_raw) in enumerate(specs):
        p_max = round(p_raw * (f_disp if kind in DISPATCHABLE else f_ren), 1)
        lo, hi = KIND_COST[kind]
        cost = round(float(rng.uniform(lo, hi)), 2) if hi > lo else lo
        gens.append({
            "id": f"gen_{idx:03d}",
            "sub_id": f"sub_{sub:03d}",
            "p_min": 0.0,
            "p_max": p_max,
            "ramp_up": max(round(p_max / 10.0, 1), 1.0),
            "ramp_down": max(round(p_max / 10.0, 1), 1.0),
            "cost": cost,
            "kind": kind,
            "dispatchable": kind in DISPATCHABLE,
        })
    return gens


def build_loads() -> list[dict]:
    subs = [0, 1, 2] + [s for s in range(3, N_SUBS) if s % 6 != 5][:96]
    assert len(subs) == N_LOADS
    return [{"id": f"load_{i:03d}", "sub_id": f"sub_{s:03d}"} for i, s in enumerate(sorted(subs))]


def size_thermal_limits(raw: dict) -> None:
    model = parse_grid(raw)
    net = to_bus_branch(model, model.reference_topology())
    cfg = SolverConfig(method=DC)
    disp = np.array([g.dispatchable for g in model.generators])
    p_max = np.array([g.p_max for g in model.generators])
    mean_demand = 0.45 * p_max[disp].sum()
    n_loads = len(model.loads)

    worst = np.zeros(len(model.lines))
    for demand, ren_frac in ((mean_demand, 0.0), (1.3 * mean_demand, 0.0), (1.3 * mean_demand, 0.65)):
        gen_p = np.where(disp, 0.0, ren_frac * p_max)
        residual = max(demand - gen_p.sum(), 0.0)
        gen_p[disp] = residual * p_max[disp] / p_max[disp].sum()
        inj = InjectionSet(
            gen_p=gen_p,
            gen_v=np.ones(len(model.generators)),
            load_p=np.full(n_loads, demand / n_loads),
            load_q=np.zeros(n_loads),
        )
        sol = solve(net, inj, cfg, model.base_mva)
        worst = np.maximum(worst, np.abs(sol.flow_from))

    for line_raw, flow in zip(raw["lines"], worst):
        line_raw["thermal_limit"] = round(max(1.8 * float(flow), 40.0), 1)


def main() -> None:
    rng = np.random.default_rng(SEED)
    raw = {
        "base_mva": 100.0,
        "substations": [{"id": f"sub_{i:03d}"} for i in range(N_SUBS)],
        "lines": build_lines(rng),
        "generators": build_generators(rng),
        "loads": build_loads(),
    }
    size_thermal_limits(raw)

    model = parse_grid(raw)
    assert len(model.substations) == N_SUBS
    assert len(model.lines) == N_LINES
    assert len(model.generators) == N_GENS
    assert len(model.loads) == N_LOADS
    n_actions = count_unitary_topology_actions(model)
    assert n_actions >= 70_000, n_actions

    out = os.path.join(os.path.dirname(__file__), "..", "src", "gridops", "data", "case118.json")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(serialize_grid(model))
    print(f"case118: {n_actions} unitary topology actions, written to {os.path.normpath(out)}")


if __name__ == "__main__":
    main()
