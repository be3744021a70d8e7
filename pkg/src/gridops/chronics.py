"""Scenario time series: loading from CSV directories and synthetic generation.

A scenario directory holds load_p.csv, load_q.csv, prod_p.csv, prod_v.csv,
optional forecast_load_p.csv / forecast_prod_p.csv, and maintenance.csv.
Each CSV has an id header row and one data row per step.  Loaded series are
bound to a grid model, which permutes columns into canonical model order and
validates ids.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ChronicsError
from .model import GridModel
from .powerflow import InjectionSet

SERIES_FILES = ("load_p.csv", "load_q.csv", "prod_p.csv", "prod_v.csv")
FORECAST_FILES = ("forecast_load_p.csv", "forecast_prod_p.csv")


@dataclass(frozen=True)
class MixConfig:
    renewable_share: float
    seed: int = 0
    days: int = 7

    def __post_init__(self):
        if not 0.05 <= self.renewable_share <= 0.40:
            raise ValueError(
                f"renewable_share must lie in [0.05, 0.40], got {self.renewable_share}"
            )
        if self.days < 1:
            raise ValueError("days must be >= 1")


@dataclass(frozen=True)
class ScenarioChronics:
    id: str
    step_count: int
    dt: int  # minutes per step
    load_ids: tuple[str, ...]
    gen_ids: tuple[str, ...]
    load_p: np.ndarray  # (step_count, n_loads) MW
    load_q: np.ndarray  # MVAr
    gen_p: np.ndarray  # (step_count, n_gens) MW, scheduled
    gen_v: np.ndarray  # per-unit setpoints
    forecast_load_p: np.ndarray | None
    forecast_gen_p: np.ndarray | None
    maintenance: tuple[tuple[str, int, int], ...]  # (line id, start, end), [start, end)


def _read_csv(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ChronicsError(f"{os.path.basename(path)}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ChronicsError(
                    f"{os.path.basename(path)}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ChronicsError(f"{os.path.basename(path)}: row {lineno}: {exc}") from exc
    return [h.strip() for h in header], np.array(rows, dtype=float).reshape(len(rows), len(header))


def load_scenario(directory: str, model: GridModel | None = None, dt: int = 5) -> ScenarioChronics:
    """Read a scenario directory; errors carry file and row context."""
    series = {}
    for name in SERIES_FILES:
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            raise ChronicsError(f"missing required file {name} in {directory}")
        series[name] = _read_csv(path)

    step_count = series["load_p.csv"][1].shape[0]
    for name in SERIES_FILES:
        rows = series[name][1].shape[0]
        if rows != step_count:
            raise ChronicsError(
                f"{name}: row-count mismatch, {rows} rows vs {step_count} in load_p.csv"
            )
    load_ids = tuple(series["load_p.csv"][0])
    gen_ids = tuple(series["prod_p.csv"][0])
    if tuple(series["load_q.csv"][0]) != load_ids:
        raise ChronicsError("load_q.csv: id header differs from load_p.csv")
    if tuple(series["prod_v.csv"][0]) != gen_ids:
        raise ChronicsError("prod_v.csv: id header differs from prod_p.csv")

    forecasts = {}
    for name in FORECAST_FILES:
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            forecasts[name] = None
            continue
        header, rows = _read_csv(path)
        if rows.shape[0] != step_count:
            raise ChronicsError(
                f"{name}: row-count mismatch, {rows.shape[0]} rows vs {step_count} in load_p.csv"
            )
        want = load_ids if name == "forecast_load_p.csv" else gen_ids
        if tuple(header) != want:
            raise ChronicsError(f"{name}: id header differs from its realized series")
        forecasts[name] = rows

    maintenance = []
    mpath = os.path.join(directory, "maintenance.csv")
    if os.path.exists(mpath):
        with open(mpath, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["line_id", "start_step", "end_step"]:
                raise ChronicsError("maintenance.csv: header must be line_id,start_step,end_step")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    line_id, start, end = row[0].strip(), int(row[1]), int(row[2])
                except (IndexError, ValueError) as exc:
                    raise ChronicsError(f"maintenance.csv: row {lineno}: {exc}") from exc
                if not (0 <= start < end <= step_count):
                    raise ChronicsError(
                        f"maintenance.csv: row {lineno}: window [{start}, {end}) outside [0, {step_count}]"
                    )
                maintenance.append((line_id, start, end))

    ch = ScenarioChronics(
        id=os.path.basename(os.path.normpath(directory)),
        step_count=step_count,
        dt=dt,
        load_ids=load_ids,
        gen_ids=gen_ids,
        load_p=series["load_p.csv"][1],
        load_q=series["load_q.csv"][1],
        gen_p=series["prod_p.csv"][1],
        gen_v=series["prod_v.csv"][1],
        forecast_load_p=forecasts["forecast_load_p.csv"],
        forecast_gen_p=forecasts["forecast_prod_p.csv"],
        maintenance=tuple(maintenance),
    )
    if model is not None:
        ch = bind(ch, model)
    return ch


def bind(ch: ScenarioChronics, model: GridModel) -> ScenarioChronics:
    """Permute columns into model order and validate ids against the model."""
    want_gens = tuple(g.id for g in model.generators)
    want_loads = tuple(l.id for l in model.loads)
    if set(ch.gen_ids) != set(want_gens):
        unknown = sorted(set(ch.gen_ids) - set(want_gens)) or sorted(set(want_gens) - set(ch.gen_ids))
        raise ChronicsError(f"prod_p.csv: generator ids do not match the grid (mismatch near {unknown[0]!r})")
    if set(ch.load_ids) != set(want_loads):
        unknown = sorted(set(ch.load_ids) - set(want_loads)) or sorted(set(want_loads) - set(ch.load_ids))
        raise ChronicsError(f"load_p.csv: load ids do not match the grid (mismatch near {unknown[0]!r})")
    for line_id, _, _ in ch.maintenance:
        if line_id not in model.line_index:
            raise ChronicsError(f"maintenance.csv: unknown line id {line_id!r}")

    gperm = [ch.gen_ids.index(g) for g in want_gens]
    lperm = [ch.load_ids.index(l) for l in want_loads]
    ch = replace(
        ch,
        load_ids=want_loads,
        gen_ids=want_gens,
        load_p=ch.load_p[:, lperm],
        load_q=ch.load_q[:, lperm],
        gen_p=ch.gen_p[:, gperm],
        gen_v=ch.gen_v[:, gperm],
        forecast_load_p=None if ch.forecast_load_p is None else ch.forecast_load_p[:, lperm],
        forecast_gen_p=None if ch.forecast_gen_p is None else ch.forecast_gen_p[:, gperm],
    )
    nondisp = ~model.gen_dispatchable
    if nondisp.any() and (ch.gen_p[:, nondisp] < 0).any():
        raise ChronicsError("prod_p.csv: negative output on a non-dispatchable generator")
    total_gen = ch.gen_p.sum(axis=1)
    total_load = ch.load_p.sum(axis=1)
    short = np.nonzero(total_gen < 0.98 * total_load)[0]
    if short.size:
        raise ChronicsError(
            f"scenario infeasible at step {int(short[0])}: generation {total_gen[short[0]]:.1f} MW "
            f"below 98% of demand {total_load[short[0]]:.1f} MW"
        )
    return ch


def save_scenario(ch: ScenarioChronics, directory: str) -> None:
    """Write the CSV directory form; floats use shortest round-trip repr."""
    os.makedirs(directory, exist_ok=True)

    def _write(name: str, ids: tuple[str, ...], data: np.ndarray) -> None:
        with open(os.path.join(directory, name), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(ids)
            for row in data:
                writer.writerow([repr(float(x)) for x in row])

    _write("load_p.csv", ch.load_ids, ch.load_p)
    _write("load_q.csv", ch.load_ids, ch.load_q)
    _write("prod_p.csv", ch.gen_ids, ch.gen_p)
    _write("prod_v.csv", ch.gen_ids, ch.gen_v)
    if ch.forecast_load_p is not None:
        _write("forecast_load_p.csv", ch.load_ids, ch.forecast_load_p)
    if ch.forecast_gen_p is not None:
        _write("forecast_prod_p.csv", ch.gen_ids, ch.forecast_gen_p)
    if ch.maintenance:
        with open(os.path.join(directory, "maintenance.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["line_id", "start_step", "end_step"])
            for line_id, start, end in ch.maintenance:
                writer.writerow([line_id, start, end])


def frame_at(ch: ScenarioChronics, t: int) -> InjectionSet:
    """Realized injections at step t (chronics must be bound to the model)."""
    if not 0 <= t < ch.step_count:
        raise IndexError(f"step {t} outside [0, {ch.step_count})")
    return InjectionSet(
        gen_p=ch.gen_p[t].copy(),
        gen_v=ch.gen_v[t].copy(),
        load_p=ch.load_p[t].copy(),
        load_q=ch.load_q[t].copy(),
    )


def forecast_at(ch: ScenarioChronics, t: int) -> InjectionSet:
    """One-step-ahead forecast made at t: forecast columns if present, else
    persistence of frame t.  Voltage and reactive series always persist."""
    if not 0 <= t < ch.step_count:
        raise IndexError(f"step {t} outside [0, {ch.step_count})")
    load_p = ch.forecast_load_p[t] if ch.forecast_load_p is not None else ch.load_p[t]
    gen_p = ch.forecast_gen_p[t] if ch.forecast_gen_p is not None else ch.gen_p[t]
    return InjectionSet(
        gen_p=gen_p.copy(),
        gen_v=ch.gen_v[t].copy(),
        load_p=load_p.copy(),
        load_q=ch.load_q[t].copy(),
    )


def calendar_at(ch: ScenarioChronics, t: int) -> tuple[int, int, int, int]:
    """(month, day-of-week, hour, minute) for step t; scenarios start on a
    Monday at 00:00 in month 1."""
    minutes = int(t) * int(ch.dt)
    return (1, (minutes // 1440) % 7, (minutes // 60) % 24, minutes % 60)


# ---- synthetic generation -------------------------------------------------


def generate_synthetic(model: GridModel, cfg: MixConfig, scenario_id: str | None = None) -> ScenarioChronics:
    """Generate a seeded scenario with a target renewable energy share.

    Demand is a daily/weekly sinusoid with AR(1) noise; wind is autocorrelated
    noise, solar a clipped diurnal bell.  Renewable outputs are scaled by a
    fixed-point loop (with curtailment at p_max) until the realized energy
    share lands within 3 points of the target.  Dispatchable units fill the
    residual proportionally to capacity, respecting p_min/p_max and ramps.
    """
    rng = np.random.default_rng(cfg.seed)
    steps_per_day = 1440 // 5
    T = cfg.days * steps_per_day
    n_loads = len(model.loads)

    disp = [i for i, g in enumerate(model.generators) if g.dispatchable]
    wind = [i for i, g in enumerate(model.generators) if g.kind == "wind"]
    solar = [i for i, g in enumerate(model.generators) if g.kind == "solar"]
    p_max = model.gen_p_max
    p_min = model.gen_p_min

    # demand: daily double hump, weekend dip, slow AR(1) wobble
    t = np.arange(T)
    td = (t % steps_per_day) / steps_per_day
    daily = 1.0 + 0.18 * np.sin(2 * np.pi * (td - 0.30)) + 0.06 * np.sin(4 * np.pi * (td - 0.10))
    dow = (t // steps_per_day) % 7
    weekly = np.where(dow >= 5, 0.88, 1.0)
    noise = _ar1(rng, T, phi=0.97, sigma=0.006)
    base_total = 0.45 * p_max[disp].sum()
    total_demand = base_total * daily * weekly * (1.0 + noise)

    weights = 0.8 + 0.4 * rng.random(n_loads)
    weights = weights / weights.sum()
    load_p = np.empty((T, n_loads))
    for i in range(n_loads):
        wobble = _ar1(rng, T, phi=0.95, sigma=0.004)
        load_p[:, i] = total_demand * weights[i] * (1.0 + wobble)
    tan_phi = 0.12 + 0.12 * rng.random(n_loads)
    load_q = load_p * tan_phi

    # raw renewable profiles in MW, before share scaling
    raw = np.zeros((T, len(model.generators)))
    for g in wind:
        level = 0.35 + _ar1(rng, T, phi=0.995, sigma=0.012)
        raw[:, g] = p_max[g] * np.clip(level, 0.0, 0.95)
    bell = np.clip(np.sin(np.pi * (td - 0.25) / 0.5), 0.0, None) ** 2
    for g in solar:
        cloud = np.clip(0.85 + _ar1(rng, T, phi=0.98, sigma=0.015), 0.3, 1.0)
        raw[:, g] = p_max[g] * bell * cloud

    renewables = wind + solar
    demand_energy = load_p.sum()
    target = cfg.renewable_share * demand_energy
    raw_energy = raw[:, renewables].sum() if renewables else 0.0
    if raw_energy <= 0:
        raise ChronicsError(
            f"grid has no renewable generation; cannot realize share {cfg.renewable_share}"
        )
    ren = np.zeros_like(raw)
    scale = target / raw_energy
    for _ in range(8):
        ren[:, renewables] = np.minimum(raw[:, renewables] * scale, p_max[renewables])
        got = ren[:, renewables].sum()
        if abs(got - target) / demand_energy < 0.005:
            break
        if got <= 0:
            break
        scale *= target / got
    realized = ren[:, renewables].sum() / demand_energy
    if abs(realized - cfg.renewable_share) > 0.03:
        raise ChronicsError(
            f"cannot realize renewable share {cfg.renewable_share:.2f} "
            f"(best {realized:.2f}); reduce the share or add renewable capacity"
        )

    # dispatchable fill: proportional target, then per-step ramp-feasible chase
    margin = 1.02  # headroom for losses and the slack bus
    residual = load_p.sum(axis=1) * margin - ren.sum(axis=1)
    lo, hi = p_min[disp].sum(), p_max[disp].sum()
    if (residual < lo - 1e-9).any() or (residual > hi + 1e-9).any():
        bad = int(np.argmax((residual < lo) | (residual > hi)))
        raise ChronicsError(
            f"residual demand {residual[bad]:.1f} MW at step {bad} outside the dispatchable "
            f"envelope [{lo:.1f}, {hi:.1f}]; adjust the mix"
        )
    gen_p = np.zeros((T, len(model.generators)))
    gen_p[:, :] = ren
    span = (p_max[disp] - p_min[disp])
    span_total = span.sum()
    prop = p_min[disp] + np.outer(residual - lo, span / span_total if span_total > 0 else span)
    prev = prop[0].copy()
    gen_p[0, disp] = prev
    ru = model.gen_ramp_up[disp]
    rd = model.gen_ramp_down[disp]
    for k in range(1, T):
        step = np.clip(prop[k] - prev, -rd, ru)
        p = np.clip(prev + step, p_min[disp], p_max[disp])
        gap = residual[k] - p.sum()
        for _ in range(4):
            if abs(gap) < 1e-9:
                break
            if gap > 0:
                room = np.minimum(prev + ru, p_max[disp]) - p
            else:
                room = np.maximum(prev - rd, p_min[disp]) - p
            total_room = room.sum()
            if abs(total_room) < 1e-12:
                break
            frac = min(1.0, gap / total_room) if total_room != 0 else 0.0
            p = p + room * frac
            gap = residual[k] - p.sum()
        gen_p[k, disp] = p
        prev = p

    gen_v = np.full((T, len(model.generators)), 1.0)

    # forecasts: next-step truth, renewables and loads lightly perturbed
    f_load = np.vstack([load_p[1:], load_p[-1:]])
    f_load = f_load * (1.0 + rng.normal(0.0, 0.01, size=f_load.shape))
    f_gen = np.vstack([gen_p[1:], gen_p[-1:]])
    if renewables:
        f_gen[:, renewables] = np.minimum(
            np.clip(f_gen[:, renewables] * (1.0 + rng.normal(0.0, 0.02, size=(T, len(renewables)))), 0.0, None),
            p_max[renewables],
        )

    sid = scenario_id or f"synthetic_s{cfg.seed}_m{int(round(cfg.renewable_share * 100)):02d}"
    return ScenarioChronics(
        id=sid,
        step_count=T,
        dt=5,
        load_ids=tuple(l.id for l in model.loads),
        gen_ids=tuple(g.id for g in model.generators),
        load_p=load_p,
        load_q=load_q,
        gen_p=gen_p,
        gen_v=gen_v,
        forecast_load_p=f_load,
        forecast_gen_p=f_gen,
        maintenance=(),
    )


def renewable_energy_share(ch: ScenarioChronics, model: GridModel) -> float:
    """Realized renewable energy divided by demand energy over the horizon."""
    ren = [i for i, g in enumerate(model.generators) if g.kind in ("wind", "solar")]
    if not ren:
        return 0.0
    return float(ch.gen_p[:, ren].sum() / ch.load_p.sum())


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.normal(0.0, sigma, size=n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return out
