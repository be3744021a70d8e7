"""Canonical flat encodings of observations and actions, plus state digests.

The layouts are fixed, documented orders over the model's canonical element
ordering (ids ascending; global element order = line from-ends, line to-ends,
generators, loads).  Replays and the wrapper package both rely on these being
bit-exact.

Observation vector layout (float64):
    [t, month, dow, hour, minute]                       5
    rho                                                 n_lines
    line_status (0/1)                                   n_lines
    topo_vect (1/2, -1 for ends of open lines)          n_elements
    prod_p (MW)                                         n_gens
    load_p (MW)                                         n_loads
    load_q (MVAr)                                       n_loads
    line_cooldown                                       n_lines
    sub_cooldown                                        n_subs
    forced_outage_remaining                             n_lines
    last_action_legal (0/1)                             1

Action vector layout (float64), all-zeros = do-nothing:
    set_bus (0 = untouched, else 1/2)                   n_elements
    [line_slot (line index + 1, 0 = none), op (+1/-1),
     bus_from (0 = keep), bus_to (0 = keep)]            4
    redispatch (MW, dispatchable generators in order)   n_dispatchable
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .actions import Action, LineSet, SubReconfig
from .exceptions import ActionError
from .model import GridModel

OBS_HEADER = ("t", "month", "dow", "hour", "minute")


def observation_layout(model: GridModel) -> tuple[tuple[str, int, int], ...]:
    """(name, offset, length) for every named slice of the observation."""
    n_lines = len(model.lines)
    sizes = [
        ("header", len(OBS_HEADER)),
        ("rho", n_lines),
        ("line_status", n_lines),
        ("topo_vect", model.n_elements),
        ("prod_p", len(model.generators)),
        ("load_p", len(model.loads)),
        ("load_q", len(model.loads)),
        ("line_cooldown", n_lines),
        ("sub_cooldown", len(model.substations)),
        ("forced_outage_remaining", n_lines),
        ("last_action_legal", 1),
    ]
    out = []
    offset = 0
    for name, size in sizes:
        out.append((name, offset, size))
        offset += size
    return tuple(out)


def observation_size(model: GridModel) -> int:
    name, offset, size = observation_layout(model)[-1]
    return offset + size


def action_layout(model: GridModel) -> tuple[tuple[str, int, int], ...]:
    n_disp = len(model.dispatchable_gens)
    return (
        ("set_bus", 0, model.n_elements),
        ("line_set", model.n_elements, 4),
        ("redispatch", model.n_elements + 4, n_disp),
    )


def action_size(model: GridModel) -> int:
    return model.n_elements + 4 + len(model.dispatchable_gens)


def encode_observation(obs, model: GridModel) -> np.ndarray:
    vec = np.empty(observation_size(model))
    pos = 0

    def put(chunk):
        nonlocal pos
        arr = np.asarray(chunk, dtype=float).ravel()
        vec[pos:pos + arr.size] = arr
        pos += arr.size

    put([obs.t, obs.month, obs.dow, obs.hour, obs.minute])
    put(obs.rho)
    put(obs.line_status)
    put(obs.topo_vect)
    put(obs.prod_p)
    put(obs.load_p)
    put(obs.load_q)
    put(obs.line_cooldown)
    put(obs.sub_cooldown)
    put(obs.forced_outage_remaining)
    put([1.0 if obs.last_action_legal else 0.0])
    return vec


def observation_view(vec: np.ndarray, model: GridModel) -> dict[str, np.ndarray]:
    """Named slices of a flat observation; views, not copies."""
    out = {}
    for name, offset, size in observation_layout(model):
        out[name] = vec[offset:offset + size]
    return out


def encode_action(action: Action, model: GridModel) -> np.ndarray:
    vec = np.zeros(action_size(model))
    if action.sub_reconfig is not None:
        refs = model.sub_elements[action.sub_reconfig.sub_id]
        for ref, bus in zip(refs, action.sub_reconfig.assignment):
            vec[model.element_index[ref]] = bus
    base = model.n_elements
    if action.line_set is not None:
        vec[base] = model.line_index[action.line_set.line_id] + 1
        vec[base + 1] = action.line_set.status
        vec[base + 2] = action.line_set.bus_from or 0
        vec[base + 3] = action.line_set.bus_to or 0
    if action.redispatch:
        for k, g in enumerate(model.dispatchable_gens):
            gid = model.generators[g].id
            if gid in action.redispatch:
                vec[base + 4 + k] = action.redispatch[gid]
    return vec


def decode_action(vec: np.ndarray, model: GridModel) -> Action:
    expected = action_size(model)
    if vec.shape != (expected,):
        raise ActionError(f"action vector has shape {vec.shape}, expected ({expected},)")
    sub = None
    set_bus = vec[: model.n_elements]
    touched = np.nonzero(set_bus)[0]
    if touched.size:
        subs = {int(model.element_sub[i]) for i in touched}
        if len(subs) > 1:
            names = sorted(model.substations[s].id for s in subs)
            raise ActionError(f"set_bus touches several substations: {names}")
        sub_pos = subs.pop()
        refs = model.substations[sub_pos].element_ids
        assignment = []
        for ref in refs:
            val = int(set_bus[model.element_index[ref]])
            if val not in (1, 2):
                raise ActionError(
                    f"set_bus for substation {model.substations[sub_pos].id!r} must "
                    f"cover all its elements with busbar 1 or 2, got {val}"
                )
            assignment.append(val)
        sub = SubReconfig(model.substations[sub_pos].id, tuple(assignment))
    base = model.n_elements
    line = None
    slot = int(vec[base])
    if slot:
        if not 1 <= slot <= len(model.lines):
            raise ActionError(f"line slot {slot} outside 1..{len(model.lines)}")
        op = int(vec[base + 1])
        if op not in (-1, 1):
            raise ActionError(f"line op must be -1 or +1, got {op}")
        bf = int(vec[base + 2]) or None
        bt = int(vec[base + 3]) or None
        line = LineSet(model.lines[slot - 1].id, op, bf, bt)
    redisp = {}
    for k, g in enumerate(model.dispatchable_gens):
        delta = float(vec[base + 4 + k])
        if delta != 0.0:
            redisp[model.generators[g].id] = delta
    return Action(sub_reconfig=sub, line_set=line, redispatch=redisp)


# ---- digests --------------------------------------------------------------


def model_digest(model: GridModel) -> str:
    from .model import serialize_grid

    return hashlib.sha256(serialize_grid(model).encode()).hexdigest()


def state_digest(state) -> str:
    """Canonical digest of an EnvState: any mutation changes it."""
    h = hashlib.sha256()
    h.update(int(state.t).to_bytes(8, "little", signed=True))
    h.update(state.topo.element_bus.astype(np.int8).tobytes())
    h.update(state.topo.line_status.astype(np.uint8).tobytes())
    h.update(state.overflow_steps.astype(np.int64).tobytes())
    h.update(state.line_cooldown.astype(np.int64).tobytes())
    h.update(state.sub_cooldown.astype(np.int64).tobytes())
    h.update(state.forced_outage_until.astype(np.int64).tobytes())
    h.update(state.redispatch_offset.astype(np.float64).tobytes())
    h.update(b"\x01" if state.done else b"\x00")
    h.update(state.done_reason.encode())
    return h.hexdigest()


def observation_digest(vec: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(vec, dtype=np.float64).tobytes()).hexdigest()


def config_digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
