"""Action data types.

An action bundles up to three independent parts: a single-substation busbar
reassignment, a single line status change, and a redispatch request on
dispatchable generators.  The empty action (all parts absent) is do-nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .exceptions import ActionError


@dataclass(frozen=True)
class SubReconfig:
    """Reassign every element of one substation to busbar 1 or 2.

    ``assignment`` lists the target busbar for each element of the
    substation, in the substation's canonical element order.
    """

    sub_id: str
    assignment: tuple[int, ...]


@dataclass(frozen=True)
class LineSet:
    """Force one line's status: ``status`` is +1 (connect) or -1 (disconnect).

    When connecting, ``bus_from``/``bus_to`` optionally pick the busbar at
    each end; None keeps the assignments the line had when it went out.
    """

    line_id: str
    status: int
    bus_from: int | None = None
    bus_to: int | None = None


@dataclass(frozen=True)
class Action:
    sub_reconfig: SubReconfig | None = None
    line_set: LineSet | None = None
    # gen_id -> requested MW delta on the schedule, dispatchable gens only
    redispatch: dict[str, float] = field(default_factory=dict)

    def is_do_nothing(self) -> bool:
        return (
            self.sub_reconfig is None
            and self.line_set is None
            and not any(v != 0.0 for v in self.redispatch.values())
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Action):
            return NotImplemented
        return (
            self.sub_reconfig == other.sub_reconfig
            and self.line_set == other.line_set
            and dict(self.redispatch) == dict(other.redispatch)
        )

    def __hash__(self) -> int:
        return hash(
            (self.sub_reconfig, self.line_set, tuple(sorted(self.redispatch.items())))
        )

    def to_dict(self) -> dict:
        """JSON-ready form, stable across runs."""
        out: dict = {}
        if self.sub_reconfig is not None:
            out["sub_reconfig"] = {
                "sub_id": self.sub_reconfig.sub_id,
                "assignment": list(self.sub_reconfig.assignment),
            }
        if self.line_set is not None:
            entry = {
                "line_id": self.line_set.line_id,
                "status": self.line_set.status,
            }
            if self.line_set.bus_from is not None:
                entry["bus_from"] = self.line_set.bus_from
            if self.line_set.bus_to is not None:
                entry["bus_to"] = self.line_set.bus_to
            out["line_set"] = entry
        if self.redispatch:
            out["redispatch"] = {k: self.redispatch[k] for k in sorted(self.redispatch)}
        return out

    @staticmethod
    def from_dict(data: dict) -> "Action":
        sub = None
        if "sub_reconfig" in data:
            raw = data["sub_reconfig"]
            sub = SubReconfig(str(raw["sub_id"]), tuple(int(b) for b in raw["assignment"]))
        line = None
        if "line_set" in data:
            raw = data["line_set"]
            line = LineSet(
                str(raw["line_id"]),
                int(raw["status"]),
                None if raw.get("bus_from") is None else int(raw["bus_from"]),
                None if raw.get("bus_to") is None else int(raw["bus_to"]),
            )
        redisp = {str(k): float(v) for k, v in data.get("redispatch", {}).items()}
        return Action(sub_reconfig=sub, line_set=line, redispatch=redisp)


DO_NOTHING = Action()


def validate_action(action: Action, model) -> None:
    """Check structural validity against a grid model.

    Raises :class:`ActionError` on unknown ids, wrong assignment length,
    busbar values outside {1, 2}, bad status values, or redispatch targeting
    a non-dispatchable generator.  Legality under game rules is a separate,
    softer check made by the environment.
    """
    if action.sub_reconfig is not None:
        sub = action.sub_reconfig
        if sub.sub_id not in model.sub_index:
            raise ActionError(f"unknown substation {sub.sub_id!r}")
        expected = len(model.sub_elements[sub.sub_id])
        if len(sub.assignment) != expected:
            raise ActionError(
                f"substation {sub.sub_id!r} has {expected} elements, "
                f"assignment has {len(sub.assignment)}"
            )
        for b in sub.assignment:
            if b not in (1, 2):
                raise ActionError(f"busbar must be 1 or 2, got {b}")
    if action.line_set is not None:
        if action.line_set.line_id not in model.line_index:
            raise ActionError(f"unknown line {action.line_set.line_id!r}")
        if action.line_set.status not in (-1, 1):
            raise ActionError(f"line status must be -1 or +1, got {action.line_set.status}")
        for bus in (action.line_set.bus_from, action.line_set.bus_to):
            if bus is not None and bus not in (1, 2):
                raise ActionError(f"busbar must be 1 or 2, got {bus}")
    for gen_id, delta in action.redispatch.items():
        idx = model.gen_index.get(gen_id)
        if idx is None:
            raise ActionError(f"unknown generator {gen_id!r}")
        if not model.generators[idx].dispatchable:
            raise ActionError(f"generator {gen_id!r} is not dispatchable")
        float(delta)
