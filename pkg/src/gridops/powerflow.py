"""Steady-state power flow: full AC Newton-Raphson and the DC approximation.

Everything here is a pure function over immutable inputs.  Only the island
containing the slack bus is solved; dead islands keep v = 0 and contribute
no flow (the game-rules layer decides what a dead island means).  Thermal
loading uses apparent power at the heavier-loaded end of each branch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import PowerFlowError
from .model import BusBranchNetwork

AC = "AC"
DC = "DC"


@dataclass(frozen=True)
class SolverConfig:
    method: str = AC
    tolerance: float = 1e-8
    max_iterations: int = 30
    flat_start: bool = True

    def __post_init__(self):
        if self.method not in (AC, DC):
            raise ValueError(f"method must be AC or DC, got {self.method!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class InjectionSet:
    """Realized injections for one step, in model generator/load order."""

    gen_p: np.ndarray  # MW
    gen_v: np.ndarray  # per-unit voltage setpoint
    load_p: np.ndarray  # MW
    load_q: np.ndarray  # MVAr

    def __post_init__(self):
        if self.gen_v.size and not ((self.gen_v > 0.8) & (self.gen_v < 1.2)).all():
            bad = float(self.gen_v[(self.gen_v <= 0.8) | (self.gen_v >= 1.2)][0])
            raise ValueError(f"generator voltage setpoint {bad} outside (0.8, 1.2)")


@dataclass(frozen=True)
class PowerFlowSolution:
    v: np.ndarray  # per-unit magnitude per bus
    theta: np.ndarray  # radians per bus
    flow_from: np.ndarray  # per line: MVA (AC) or signed MW (DC); 0 when out
    flow_to: np.ndarray
    p_slack: float  # MW injected at the slack bus beyond its schedule
    losses: float  # MW
    rho: np.ndarray  # per line; 0 when out
    converged: bool
    iterations: int


def _bus_targets(net: BusBranchNetwork, inj: InjectionSet, base_mva: float):
    """Per-bus net scheduled P, Q (pu) and PV voltage targets."""
    n = net.n_buses
    p = np.zeros(n)
    q = np.zeros(n)
    vset = np.full(n, np.nan)
    for bus in net.buses:
        for g in bus.gens:
            p[bus.index] += inj.gen_p[g]
            if np.isnan(vset[bus.index]):
                vset[bus.index] = inj.gen_v[g]
        for l in bus.loads:
            p[bus.index] -= inj.load_p[l]
            q[bus.index] -= inj.load_q[l]
    return p / base_mva, q / base_mva, vset


def _branch_admittances(net: BusBranchNetwork):
    ys = np.array([1.0 / complex(br.r, br.x) for br in net.branches])
    bc = np.array([br.b / 2.0 for br in net.branches])
    yff = ys + 1j * bc
    ytt = yff
    yft = -ys
    return yff, yft, ytt, yft


def _ybus(net: BusBranchNetwork) -> np.ndarray:
    n = net.n_buses
    y = np.zeros((n, n), dtype=complex)
    yff, yft, ytt, ytf = _branch_admittances(net)
    for k, br in enumerate(net.branches):
        f, t = br.bus_from, br.bus_to
        y[f, f] += yff[k]
        y[t, t] += ytt[k]
        y[f, t] += yft[k]
        y[t, f] += ytf[k]
    return y


def solve_ac(net: BusBranchNetwork, inj: InjectionSet, cfg: SolverConfig | None = None,
             base_mva: float = 100.0) -> PowerFlowSolution:
    """Newton-Raphson on the polar power-mismatch equations.

    Generator buses are PV, loads PQ, the slack bus is Vθ.  Divergence is a
    value (converged = False), never an exception.
    """
    if cfg is None:
        cfg = SolverConfig()
    n = net.n_buses
    live = sorted(net.live_buses)
    live_set = net.live_buses
    p_spec, q_spec, vset = _bus_targets(net, inj, base_mva)

    is_gen_bus = np.zeros(n, dtype=bool)
    for bus in net.buses:
        if bus.gens:
            is_gen_bus[bus.index] = True
    slack = net.slack_bus
    pv = [b for b in live if is_gen_bus[b] and b != slack]
    pq = [b for b in live if not is_gen_bus[b] and b != slack]
    pvpq = pv + pq

    # flat start: PV/slack at setpoint, PQ at 1.0 pu, all angles zero
    vm = np.where(np.isnan(vset), 1.0, vset)
    va = np.zeros(n)
    v = vm * np.exp(1j * va)

    ybus = _ybus(net)
    # dead buses: zero voltage, excluded from every index set below
    dead = np.array([b not in live_set for b in range(n)], dtype=bool)
    v[dead] = 0.0

    def mismatch(v):
        s_calc = v * np.conj(ybus @ v)
        dp = p_spec - s_calc.real
        dq = q_spec - s_calc.imag
        return np.concatenate([dp[pvpq], dq[pq]])

    converged = False
    iterations = 0
    if not pvpq and not pq:
        converged = True
    else:
        f = mismatch(v)
        converged = bool(np.max(np.abs(f)) < cfg.tolerance) if f.size else True
        while not converged and iterations < cfg.max_iterations:
            ibus = ybus @ v
            diag_v = np.diag(v)
            diag_i = np.diag(ibus)
            vnorm = np.divide(v, np.abs(v), out=np.zeros_like(v), where=np.abs(v) > 0)
            diag_vn = np.diag(vnorm)
            ds_dva = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
            ds_dvm = diag_v @ np.conj(ybus @ diag_vn) + np.conj(diag_i) @ diag_vn

            j11 = ds_dva[np.ix_(pvpq, pvpq)].real
            j12 = ds_dvm[np.ix_(pvpq, pq)].real
            j21 = ds_dva[np.ix_(pq, pvpq)].imag
            j22 = ds_dvm[np.ix_(pq, pq)].imag
            jac = np.block([[j11, j12], [j21, j22]])
            try:
                dx = np.linalg.solve(jac, f)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(dx)):
                break
            n_a = len(pvpq)
            va[pvpq] += dx[:n_a]
            vm[pq] += dx[n_a:]
            if np.any(vm[pvpq + [slack]] <= 0) or np.any(vm[pq] <= 0):
                break
            v = vm * np.exp(1j * va)
            v[dead] = 0.0
            iterations += 1
            f = mismatch(v)
            converged = bool(np.max(np.abs(f)) < cfg.tolerance)

    flow_from = np.zeros(net.n_lines)
    flow_to = np.zeros(net.n_lines)
    rho = np.zeros(net.n_lines)
    losses = 0.0
    p_slack = 0.0
    if converged:
        yff, yft, ytt, ytf = _branch_admittances(net)
        for k, br in enumerate(net.branches):
            if br.bus_from not in live_set:
                continue
            vf, vt = v[br.bus_from], v[br.bus_to]
            sf = vf * np.conj(yff[k] * vf + yft[k] * vt) * base_mva
            st = vt * np.conj(ytf[k] * vf + ytt[k] * vt) * base_mva
            flow_from[br.line] = abs(sf)
            flow_to[br.line] = abs(st)
            losses += sf.real + st.real
            rho[br.line] = max(abs(sf), abs(st)) / br.thermal_limit
        s_calc = v * np.conj(ybus @ v)
        p_slack = (s_calc[slack].real - p_spec[slack]) * base_mva
    return PowerFlowSolution(
        v=np.abs(v),
        theta=np.angle(v),
        flow_from=flow_from,
        flow_to=flow_to,
        p_slack=float(p_slack),
        losses=float(losses),
        rho=rho,
        converged=converged,
        iterations=iterations,
    )


def solve_dc(net: BusBranchNetwork, inj: InjectionSet, base_mva: float = 100.0) -> PowerFlowSolution:
    """Linear B·θ = P on the live island; lossless, slack absorbs imbalance."""
    n = net.n_buses
    live = sorted(net.live_buses)
    pos = {b: i for i, b in enumerate(live)}
    p_spec, _, _ = _bus_targets(net, inj, base_mva)

    m = len(live)
    b_mat = np.zeros((m, m))
    for br in net.branches:
        if br.bus_from not in pos:
            continue
        i, j = pos[br.bus_from], pos[br.bus_to]
        w = 1.0 / br.x
        b_mat[i, i] += w
        b_mat[j, j] += w
        b_mat[i, j] -= w
        b_mat[j, i] -= w

    slack_pos = pos[net.slack_bus]
    keep = [i for i in range(m) if i != slack_pos]
    theta_live = np.zeros(m)
    if keep:
        reduced = b_mat[np.ix_(keep, keep)]
        rhs = np.array([p_spec[live[i]] for i in keep])
        try:
            sol = np.linalg.solve(reduced, rhs)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(
                f"singular island matrix for island containing bus {net.slack_bus}"
            ) from exc
        for idx, i in enumerate(keep):
            theta_live[i] = sol[idx]

    theta = np.zeros(n)
    for b, i in pos.items():
        theta[b] = theta_live[i]
    v = np.zeros(n)
    for b in live:
        v[b] = 1.0

    flow_from = np.zeros(net.n_lines)
    flow_to = np.zeros(net.n_lines)
    rho = np.zeros(net.n_lines)
    for br in net.branches:
        if br.bus_from not in pos:
            continue
        f_pu = (theta[br.bus_from] - theta[br.bus_to]) / br.x
        flow_from[br.line] = f_pu * base_mva
        flow_to[br.line] = -f_pu * base_mva
        rho[br.line] = abs(flow_from[br.line]) / br.thermal_limit

    p_slack = float((-sum(p_spec[b] for b in live if b != net.slack_bus) - p_spec[net.slack_bus]) * base_mva)
    return PowerFlowSolution(
        v=v,
        theta=theta,
        flow_from=flow_from,
        flow_to=flow_to,
        p_slack=p_slack,
        losses=0.0,
        rho=rho,
        converged=True,
        iterations=1,
    )


def solve(net: BusBranchNetwork, inj: InjectionSet, cfg: SolverConfig, base_mva: float = 100.0) -> PowerFlowSolution:
    if cfg.method == DC:
        return solve_dc(net, inj, base_mva)
    return solve_ac(net, inj, cfg, base_mva)


def loading(sol: PowerFlowSolution, net: BusBranchNetwork) -> np.ndarray:
    """Per-line loading rate; lines without a branch (disconnected) get 0."""
    rho = np.zeros(net.n_lines)
    for br in net.branches:
        rho[br.line] = max(abs(sol.flow_from[br.line]), abs(sol.flow_to[br.line])) / br.thermal_limit
    return rho
