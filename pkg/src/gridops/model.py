"""Static grid description and its reduction to an electrical bus-branch graph.

A grid is a set of double-busbar substations joined by lines, with generators
and loads attached.  Element order is canonical everywhere: within a category,
elements sort by id; the global element order is all line from-ends, then all
line to-ends, then generators, then loads.  Per substation, elements order as
line ends (by line id), then generators, then loads.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .actions import Action, SubReconfig
from .exceptions import GridFormatError

GEN_KINDS = ("thermal", "hydro", "nuclear", "wind", "solar")
RENEWABLE_KINDS = ("wind", "solar")


class ElementRef(NamedTuple):
    """Reference to one connectable element: a line end, a generator or a load."""

    kind: str  # "line_from" | "line_to" | "gen" | "load"
    element_id: str


@dataclass(frozen=True)
class Substation:
    id: str
    element_ids: tuple[ElementRef, ...]
    busbar_count: int = 2


@dataclass(frozen=True)
class PowerLine:
    id: str
    from_sub: str
    to_sub: str
    r: float
    x: float
    b: float
    thermal_limit: float


@dataclass(frozen=True)
class Generator:
    id: str
    sub_id: str
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    cost: float
    kind: str
    dispatchable: bool


@dataclass(frozen=True)
class Load:
    id: str
    sub_id: str


@dataclass
class TopologyState:
    """Busbar assignment per element plus per-line connection status.

    ``element_bus`` follows the model's global element order and holds 1 or 2.
    A disconnected line keeps its busbar assignments; they are simply ignored
    when building the electrical graph.
    """

    element_bus: np.ndarray
    line_status: np.ndarray

    def copy(self) -> "TopologyState":
        return TopologyState(self.element_bus.copy(), self.line_status.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TopologyState):
            return NotImplemented
        return bool(
            np.array_equal(self.element_bus, other.element_bus)
            and np.array_equal(self.line_status, other.line_status)
        )


@dataclass(frozen=True)
class Bus:
    index: int
    sub: int  # substation position
    busbar: int
    gens: tuple[int, ...]  # generator positions
    loads: tuple[int, ...]  # load positions


@dataclass(frozen=True)
class Branch:
    index: int
    line: int  # line position
    bus_from: int
    bus_to: int
    r: float
    x: float
    b: float
    thermal_limit: float


@dataclass(frozen=True)
class BusBranchNetwork:
    """Electrical graph for one topology: immutable, safe to share."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    slack_bus: int
    islands: tuple[tuple[int, ...], ...]
    n_lines: int

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @cached_property
    def live_island(self) -> int:
        for i, island in enumerate(self.islands):
            if self.slack_bus in island:
                return i
        raise AssertionError("slack bus missing from island partition")

    @cached_property
    def live_buses(self) -> frozenset[int]:
        return frozenset(self.islands[self.live_island])


@dataclass(frozen=True)
class GridModel:
    base_mva: float
    substations: tuple[Substation, ...]
    lines: tuple[PowerLine, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    slack_generator: str

    # ---- id lookup -------------------------------------------------

    @cached_property
    def sub_index(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.substations)}

    @cached_property
    def line_index(self) -> dict[str, int]:
        return {l.id: i for i, l in enumerate(self.lines)}

    @cached_property
    def gen_index(self) -> dict[str, int]:
        return {g.id: i for i, g in enumerate(self.generators)}

    @cached_property
    def load_index(self) -> dict[str, int]:
        return {l.id: i for i, l in enumerate(self.loads)}

    # ---- canonical element order ------------------------------------

    @cached_property
    def element_order(self) -> tuple[ElementRef, ...]:
        order = [ElementRef("line_from", l.id) for l in self.lines]
        order += [ElementRef("line_to", l.id) for l in self.lines]
        order += [ElementRef("gen", g.id) for g in self.generators]
        order += [ElementRef("load", l.id) for l in self.loads]
        return tuple(order)

    @cached_property
    def element_index(self) -> dict[ElementRef, int]:
        return {ref: i for i, ref in enumerate(self.element_order)}

    @cached_property
    def sub_elements(self) -> dict[str, tuple[ElementRef, ...]]:
        return {s.id: s.element_ids for s in self.substations}

    @cached_property
    def element_sub(self) -> np.ndarray:
        """Substation position of every element, in global element order."""
        out = np.empty(self.n_elements, dtype=np.int64)
        for sub_pos, sub in enumerate(self.substations):
            for ref in sub.element_ids:
                out[self.element_index[ref]] = sub_pos
        return out

    @property
    def n_elements(self) -> int:
        return 2 * len(self.lines) + len(self.generators) + len(self.loads)

    # ---- line and generator arrays ----------------------------------

    @cached_property
    def line_r(self) -> np.ndarray:
        return np.array([l.r for l in self.lines], dtype=float)

    @cached_property
    def line_x(self) -> np.ndarray:
        return np.array([l.x for l in self.lines], dtype=float)

    @cached_property
    def line_b(self) -> np.ndarray:
        return np.array([l.b for l in self.lines], dtype=float)

    @cached_property
    def thermal_limit(self) -> np.ndarray:
        return np.array([l.thermal_limit for l in self.lines], dtype=float)

    @cached_property
    def gen_p_min(self) -> np.ndarray:
        return np.array([g.p_min for g in self.generators], dtype=float)

    @cached_property
    def gen_p_max(self) -> np.ndarray:
        return np.array([g.p_max for g in self.generators], dtype=float)

    @cached_property
    def gen_ramp_up(self) -> np.ndarray:
        return np.array([g.ramp_up for g in self.generators], dtype=float)

    @cached_property
    def gen_ramp_down(self) -> np.ndarray:
        return np.array([g.ramp_down for g in self.generators], dtype=float)

    @cached_property
    def gen_cost(self) -> np.ndarray:
        return np.array([g.cost for g in self.generators], dtype=float)

    @cached_property
    def gen_dispatchable(self) -> np.ndarray:
        return np.array([g.dispatchable for g in self.generators], dtype=bool)

    @cached_property
    def dispatchable_gens(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.generators) if g.dispatchable)

    @property
    def slack_gen_pos(self) -> int:
        return self.gen_index[self.slack_generator]

    def reference_topology(self) -> TopologyState:
        """Everything on busbar 1, every line connected.  Fresh copy per call."""
        return TopologyState(
            element_bus=np.ones(self.n_elements, dtype=np.int8),
            line_status=np.ones(len(self.lines), dtype=bool),
        )


# ---- parsing ------------------------------------------------------------


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise GridFormatError(message)


def _as_number(raw: dict, key: str, owner: str) -> float:
    value = raw.get(key)
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"{owner}: field {key!r} must be a number, got {value!r}",
    )
    return float(value)


def _as_id(raw: dict, key: str, owner: str) -> str:
    value = raw.get(key)
    _require(isinstance(value, str) and value != "", f"{owner}: field {key!r} must be a non-empty string")
    return value


def _unique_ids(items: list[dict], category: str) -> list[str]:
    ids = []
    seen = set()
    for raw in items:
        _require(isinstance(raw, dict), f"{category} entries must be objects")
        eid = _as_id(raw, "id", category)
        _require(eid not in seen, f"duplicate {category} id {eid!r}")
        seen.add(eid)
        ids.append(eid)
    return ids


def parse_grid(document: str | bytes | dict) -> GridModel:
    """Parse and validate a grid description document.

    Accepts the JSON text (or an already-decoded object) and returns an
    immutable model with canonically ordered elements.  Every validation
    failure names the offending element.
    """
    if isinstance(document, (str, bytes)):
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GridFormatError(f"not valid JSON: {exc}") from exc
    else:
        data = document
    _require(isinstance(data, dict), "top level must be a JSON object")
    for key in ("substations", "lines", "generators", "loads"):
        _require(isinstance(data.get(key), list), f"missing or non-list top-level key {key!r}")

    base_mva = float(data.get("base_mva", 100.0))
    _require(base_mva > 0, f"base_mva must be positive, got {base_mva}")

    sub_ids = _unique_ids(data["substations"], "substation")
    _require(len(sub_ids) > 0, "grid has no substations")
    sub_id_set = set(sub_ids)

    _unique_ids(data["lines"], "line")
    lines = []
    for raw in data["lines"]:
        lid = raw["id"]
        from_sub = _as_id(raw, "from_sub", f"line {lid!r}")
        to_sub = _as_id(raw, "to_sub", f"line {lid!r}")
        _require(from_sub in sub_id_set, f"line {lid!r}: unknown substation {from_sub!r}")
        _require(to_sub in sub_id_set, f"line {lid!r}: unknown substation {to_sub!r}")
        _require(from_sub != to_sub, f"line {lid!r}: from_sub and to_sub are both {from_sub!r}")
        r = _as_number(raw, "r", f"line {lid!r}") if "r" in raw else 0.0
        x = _as_number(raw, "x", f"line {lid!r}")
        b = _as_number(raw, "b", f"line {lid!r}") if "b" in raw else 0.0
        limit = _as_number(raw, "thermal_limit", f"line {lid!r}")
        _require(x > 0, f"line {lid!r}: x must be positive, got {x}")
        _require(r >= 0, f"line {lid!r}: r must be non-negative, got {r}")
        _require(b >= 0, f"line {lid!r}: b must be non-negative, got {b}")
        _require(limit > 0, f"line {lid!r}: thermal_limit must be positive, got {limit}")
        lines.append(PowerLine(lid, from_sub, to_sub, r, x, b, limit))
    lines.sort(key=lambda l: l.id)

    _unique_ids(data["generators"], "generator")
    gens = []
    for raw in data["generators"]:
        gid = raw["id"]
        sub = _as_id(raw, "sub_id", f"generator {gid!r}")
        _require(sub in sub_id_set, f"generator {gid!r}: unknown substation {sub!r}")
        kind = _as_id(raw, "kind", f"generator {gid!r}")
        _require(kind in GEN_KINDS, f"generator {gid!r}: unknown kind {kind!r}")
        p_min = _as_number(raw, "p_min", f"generator {gid!r}")
        p_max = _as_number(raw, "p_max", f"generator {gid!r}")
        ramp_up = _as_number(raw, "ramp_up", f"generator {gid!r}")
        ramp_down = _as_number(raw, "ramp_down", f"generator {gid!r}")
        cost = _as_number(raw, "cost", f"generator {gid!r}")
        _require(0 <= p_min <= p_max, f"generator {gid!r}: need 0 <= p_min <= p_max, got [{p_min}, {p_max}]")
        _require(ramp_up >= 0 and ramp_down >= 0, f"generator {gid!r}: ramps must be non-negative")
        dispatchable = bool(raw.get("dispatchable", kind not in RENEWABLE_KINDS))
        _require(
            not (kind in RENEWABLE_KINDS and dispatchable),
            f"generator {gid!r}: kind {kind!r} cannot be dispatchable",
        )
        gens.append(Generator(gid, sub, p_min, p_max, ramp_up, ramp_down, cost, kind, dispatchable))
    gens.sort(key=lambda g: g.id)

    _unique_ids(data["loads"], "load")
    loads = []
    for raw in data["loads"]:
        lid = raw["id"]
        sub = _as_id(raw, "sub_id", f"load {lid!r}")
        _require(sub in sub_id_set, f"load {lid!r}: unknown substation {sub!r}")
        loads.append(Load(lid, sub))
    loads.sort(key=lambda l: l.id)

    # per-substation canonical element order: line ends, generators, loads
    members: dict[str, list[ElementRef]] = {sid: [] for sid in sub_ids}
    line_ends: dict[str, list[tuple[str, ElementRef]]] = {sid: [] for sid in sub_ids}
    for line in lines:
        line_ends[line.from_sub].append((line.id, ElementRef("line_from", line.id)))
        line_ends[line.to_sub].append((line.id, ElementRef("line_to", line.id)))
    for sid in sub_ids:
        members[sid] = [ref for _, ref in sorted(line_ends[sid])]
    for gen in gens:
        members[gen.sub_id].append(ElementRef("gen", gen.id))
    for load in loads:
        members[load.sub_id].append(ElementRef("load", load.id))

    subs = []
    for sid in sorted(sub_ids):
        _require(len(members[sid]) > 0, f"substation {sid!r} has no attached elements")
        subs.append(Substation(sid, tuple(members[sid])))

    dispatchable = [g for g in gens if g.dispatchable]
    _require(len(dispatchable) > 0, "grid has no dispatchable generator")
    slack = data.get("slack_generator")
    if slack is None:
        # largest p_max wins; break exact ties toward the lowest id
        best = max(g.p_max for g in dispatchable)
        slack = min(g.id for g in dispatchable if g.p_max == best)
    else:
        _require(isinstance(slack, str), "slack_generator must be a generator id")
        match = [g for g in gens if g.id == slack]
        _require(bool(match), f"slack_generator {slack!r} is not a known generator")
        _require(match[0].dispatchable, f"slack_generator {slack!r} is not dispatchable")

    return GridModel(
        base_mva=base_mva,
        substations=tuple(subs),
        lines=tuple(lines),
        generators=tuple(gens),
        loads=tuple(loads),
        slack_generator=slack,
    )


def load_grid(path) -> GridModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_grid(fh.read())


def serialize_grid(model: GridModel) -> str:
    """Render a model back to its JSON document form."""
    doc = {
        "base_mva": model.base_mva,
        "slack_generator": model.slack_generator,
        "substations": [{"id": s.id} for s in model.substations],
        "lines": [
            {
                "id": l.id,
                "from_sub": l.from_sub,
                "to_sub": l.to_sub,
                "r": l.r,
                "x": l.x,
                "b": l.b,
                "thermal_limit": l.thermal_limit,
            }
            for l in model.lines
        ],
        "generators": [
            {
                "id": g.id,
                "sub_id": g.sub_id,
                "kind": g.kind,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "ramp_up": g.ramp_up,
                "ramp_down": g.ramp_down,
                "cost": g.cost,
                "dispatchable": g.dispatchable,
            }
            for g in model.generators
        ],
        "loads": [{"id": l.id, "sub_id": l.sub_id} for l in model.loads],
    }
    return json.dumps(doc, indent=2)


# ---- bus-branch reduction ------------------------------------------------


def to_bus_branch(model: GridModel, topo: TopologyState) -> BusBranchNetwork:
    """Collapse busbar assignments into electrical buses and branches.

    A busbar becomes a bus only when at least one connected element sits on
    it; disconnected line ends do not materialize buses.  Islands are the
    connected components of the resulting graph, listed by ascending first
    bus index.
    """
    n_lines = len(model.lines)
    element_bus = topo.element_bus
    status = topo.line_status

    # which (sub position, busbar) pairs materialize, in deterministic order
    occupants: dict[tuple[int, int], tuple[list[int], list[int]]] = {}

    def _slot(sub_pos: int, busbar: int) -> tuple[list[int], list[int]]:
        key = (sub_pos, busbar)
        if key not in occupants:
            occupants[key] = ([], [])
        return occupants[key]

    for g_pos, gen in enumerate(model.generators):
        ref = model.element_index[ElementRef("gen", gen.id)]
        _slot(model.sub_index[gen.sub_id], int(element_bus[ref]))[0].append(g_pos)
    for l_pos, load in enumerate(model.loads):
        ref = model.element_index[ElementRef("load", load.id)]
        _slot(model.sub_index[load.sub_id], int(element_bus[ref]))[1].append(l_pos)
    for li, line in enumerate(model.lines):
        if not status[li]:
            continue
        _slot(model.sub_index[line.from_sub], int(element_bus[li]))
        _slot(model.sub_index[line.to_sub], int(element_bus[n_lines + li]))

    bus_lookup: dict[tuple[int, int], int] = {}
    buses = []
    for key in sorted(occupants):
        gens, loads = occupants[key]
        bus_lookup[key] = len(buses)
        buses.append(Bus(len(buses), key[0], key[1], tuple(gens), tuple(loads)))

    branches = []
    adjacency: list[list[int]] = [[] for _ in buses]
    for li, line in enumerate(model.lines):
        if not status[li]:
            continue
        bus_from = bus_lookup[(model.sub_index[line.from_sub], int(element_bus[li]))]
        bus_to = bus_lookup[(model.sub_index[line.to_sub], int(element_bus[n_lines + li]))]
        branches.append(
            Branch(len(branches), li, bus_from, bus_to, line.r, line.x, line.b, line.thermal_limit)
        )
        adjacency[bus_from].append(bus_to)
        adjacency[bus_to].append(bus_from)

    islands = []
    seen = [False] * len(buses)
    for start in range(len(buses)):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        component = []
        while stack:
            node = stack.pop()
            component.append(node)
            for nxt in adjacency[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        islands.append(tuple(sorted(component)))

    slack_gen = model.slack_gen_pos
    slack_ref = model.element_index[ElementRef("gen", model.slack_generator)]
    slack_key = (
        model.sub_index[model.generators[slack_gen].sub_id],
        int(element_bus[slack_ref]),
    )
    return BusBranchNetwork(
        buses=tuple(buses),
        branches=tuple(branches),
        slack_bus=bus_lookup[slack_key],
        islands=tuple(islands),
        n_lines=n_lines,
    )


# ---- action space --------------------------------------------------------


def count_unitary_topology_actions(model: GridModel) -> int:
    """Total action count without materializing the list: sum of 2^(k-1)."""
    return sum(2 ** (len(s.element_ids) - 1) for s in model.substations)


def enumerate_unitary_topology_actions(model: GridModel) -> list[Action]:
    """All single-substation busbar assignments, one Action each.

    Per substation with k elements: 2^(k-1) assignments, quotienting the
    busbar relabeling symmetry by pinning the first element to busbar 1.
    The identity assignment is included.  Order is deterministic.
    """
    out = []
    for sub in model.substations:
        k = len(sub.element_ids)
        for tail in itertools.product((1, 2), repeat=k - 1):
            out.append(Action(sub_reconfig=SubReconfig(sub.id, (1,) + tail)))
    return out
