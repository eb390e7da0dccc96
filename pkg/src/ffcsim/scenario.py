"""Batch experiment runner: wires a case, plant model (reduced LTI or
detailed converter ODEs), FFC controllers and disturbances into a closed
loop, and exports trajectory/event/summary CSVs.

Disturbance powers are injection deviations in MW: negative values are
generation deficits / load increases.  The load-shed flag latches when any
unit frequency leaves the +-0.5 Hz band or any 250 ms-averaged unit RoCoF
magnitude exceeds 1 Hz/s.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli

from . import vscdevice as vd
from .coi import coi_from_fleet, estimate_disturbance
from .mpc import (CentralizedController, ControlEvent, DecentralizedController,
                  MpcConfig, should_deactivate, trigger_centralized,
                  trigger_decentralized)
from .network import GridCase, bundled_case_path, load_case
from .reduced import assemble
from .statespace import discretize_zoh

__all__ = [
    "Disturbance",
    "Scenario",
    "ScenarioResult",
    "run",
    "run_matrix",
    "export",
    "load_scenario",
]

SHED_FREQ_BAND = 0.5      # Hz beyond nominal
SHED_FREQ_DWELL = 0.15    # s the band breach must persist (UFLS relay delay)
SHED_ROCOF = 1.0          # Hz/s, 250 ms average
ROCOF_CYCLE = 0.25        # s


@dataclass(frozen=True)
class Disturbance:
    time: float
    bus: int          # 0-based
    dp_mw: float      # injection deviation; negative = deficit
    kind: str = "load-step"

    def __post_init__(self):
        if self.kind not in ("load-step", "gen-loss"):
            raise ValueError(f"unknown disturbance kind '{self.kind}'")


@dataclass(frozen=True)
class Scenario:
    case_path: str | Path
    fidelity: str = "reduced"            # reduced | detailed-vsc
    controller: str = "none"             # none | decentralized |
    #                                      decentralized-explicit | centralized
    disturbances: tuple[Disturbance, ...] = ()
    t_end: float = 10.0
    dt_plant: float | None = None
    mpc: MpcConfig = field(default_factory=MpcConfig)
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.fidelity not in ("reduced", "detailed-vsc"):
            raise ValueError(f"unknown fidelity '{self.fidelity}'")
        modes = ("none", "decentralized", "decentralized-explicit", "centralized")
        if self.controller not in modes:
            raise ValueError(f"unknown controller mode '{self.controller}'")
        dt = self.dt()
        if self.fidelity == "reduced" and dt > self.mpc.T_s / 10:
            raise ValueError("reduced plant step must be <= T_s/10")
        if self.fidelity == "detailed-vsc" and dt > 1e-3:
            raise ValueError("detailed plant step must be <= 1 ms")
        for d in self.disturbances:
            if not (0.0 <= d.time <= self.t_end):
                raise ValueError("disturbance time outside the horizon")

    def dt(self) -> float:
        if self.dt_plant is not None:
            return self.dt_plant
        return 0.0025 if self.fidelity == "reduced" else 2e-4


@dataclass
class ScenarioResult:
    scenario: Scenario
    case: GridCase
    t: np.ndarray
    freqs: np.ndarray          # (n_t, n_units) Hz, converters first
    rocof_avg: np.ndarray      # (n_t, n_units) Hz/s, 250 ms average
    coi_freq: np.ndarray       # (n_t,) inertia-weighted aggregate, Hz
    flows: np.ndarray          # (n_t, n_b) p.u.
    p_vsc: np.ndarray          # (n_t, n_c) converter p.u. output
    soc: np.ndarray            # (n_t, n_c)
    dp_cmd: np.ndarray         # (n_t, n_c) accumulated applied moves, sys p.u.
    v_dc: np.ndarray | None
    i_dc: np.ndarray | None
    events: list[ControlEvent]
    summary: dict
    baseline: "ScenarioResult | None" = None

    @property
    def unit_names(self) -> list[str]:
        names = [f"vsc{i + 1}" for i in range(self.case.n_vsc)]
        names += [f"sg{j + 1}" for j in range(self.case.n_sg)]
        return names


def _coi_trace(case: GridCase, freqs: np.ndarray) -> np.ndarray:
    w = []
    for u in case.vscs:
        r_sys = u.rp * case.s_base / u.rating_mw
        w.append(1.0 / (r_sys * u.omega_f))
    for g in case.sgs:
        w.append(g.M_s)
    w = np.array(w)
    return freqs @ w / w.sum()


def rocof_cycle_average(t: np.ndarray, freqs: np.ndarray,
                        cycle: float = ROCOF_CYCLE) -> np.ndarray:
    """Protection-style RoCoF: frequency change over a sliding cycle."""
    dt = t[1] - t[0]
    lag = max(1, int(round(cycle / dt)))
    out = np.zeros_like(freqs)
    out[lag:] = (freqs[lag:] - freqs[:-lag]) / (lag * dt)
    return out


def _summarize(scenario, t, freqs, rocof_avg, coi_freq, events, f_0, runtime):
    nadir = float(freqs.min())
    t_nadir = float(t[np.unravel_index(np.argmin(freqs), freqs.shape)[0]])
    max_roc = float(np.abs(rocof_avg).max())
    coi_rocof = rocof_cycle_average(t, coi_freq[:, None])[:, 0]
    max_coi_roc = float(np.abs(coi_rocof).max())
    # shed: per-unit frequency band sustained past the relay dwell; RoCoF
    # clause on the aggregate frequency (system-protection reading of the
    # 250 ms cycle criterion)
    dt = t[1] - t[0]
    dwell = max(1, int(round(SHED_FREQ_DWELL / dt)))
    outside = np.abs(freqs - f_0) > SHED_FREQ_BAND
    freq_breach = np.zeros(outside.shape[0], dtype=bool)
    if outside.shape[0] > dwell:
        run = np.ones(outside.shape[0] - dwell, dtype=bool)[:, None] & \
            outside[:-dwell]
        for off in range(1, dwell + 1):
            run &= outside[off:outside.shape[0] - dwell + off]
        freq_breach[dwell:] = run.any(axis=1)
    roc_breach = np.abs(coi_rocof) > SHED_ROCOF
    breach = freq_breach | roc_breach
    shed = bool(breach.any())
    shed_time = float(t[int(np.argmax(breach))]) if shed else float("nan")
    effort = sum(abs(e.value) for e in events if e.kind == "apply")
    return {
        "label": scenario.label or scenario.controller,
        "controller": scenario.controller,
        "fidelity": scenario.fidelity,
        "nadir_hz": nadir,
        "t_nadir_s": t_nadir,
        "max_rocof_hz_s": max_roc,
        "max_coi_rocof_hz_s": max_coi_roc,
        "shed": shed,
        "shed_time_s": shed_time,
        "effort_pu": float(effort),
        "runtime_s": float(runtime),
        "n_solves": sum(1 for e in events if e.kind == "solve"),
    }


class _DecentralizedSupervisor:
    """Trigger bookkeeping + controller scheduling for one converter."""

    def __init__(self, ctrl: DecentralizedController, coi_M: float,
                 cfg: MpcConfig, dt: float, f_0: float,
                 explicit: bool = False):
        self.ctrl = ctrl
        self.coi_M = coi_M
        self.cfg = cfg
        self.dt = dt
        self.f_0 = f_0
        self.explicit = explicit
        self.win = max(1, int(round(cfg.trigger_window / dt)))
        self.deact_win = max(1, int(round(cfg.deact_window / dt)))
        self.rocof_hist: list[float] = []
        self.t_cross: float | None = None
        self.cross_idx: int | None = None
        self.next_sample: float | None = None
        self.k_act: int | None = None
        self.applied = 0.0

    def observe(self, k: int, t: float, rocof_pu: float, f_hist, unit_col,
                soc: float, p_conv: float) -> float:
        """Advance one plant step; returns the setpoint increment applied now."""
        cfg = self.cfg
        self.rocof_hist.append(rocof_pu * self.f_0)  # Hz/s
        ctrl = self.ctrl
        inc = 0.0
        if ctrl.state.mode == "idle":
            window = self.rocof_hist[-self.win:]
            if self.t_cross is None:
                if trigger_decentralized(window, cfg.deadband):
                    self.t_cross = t
                    self.cross_idx = k
            elif t >= self.t_cross + cfg.trigger_window - 1e-12:
                est_win = np.array(self.rocof_hist[self.cross_idx:k + 1])
                dP = estimate_disturbance(est_win.mean() / self.f_0, self.coi_M)
                lag = max(1, int(round(cfg.T_s / self.dt)))
                f_prev = f_hist[max(0, k - lag), unit_col]
                ctrl.activate(t, dP, f_prev)
                if self.explicit:
                    ctrl.attach_explicit_law(t)
                self.next_sample = t
                self.k_act = k
                self.t_cross = None
        if ctrl.state.mode == "active":
            if self.next_sample is not None and t >= self.next_sample - 1e-12:
                n_anchor = max(1, int(round(0.1 / self.dt)))
                anchor = float(np.mean(self.rocof_hist[-n_anchor:]))
                inc = ctrl.step(t, f_hist[k, unit_col], soc, p_conv,
                                rocof_meas=anchor)
                self.next_sample += cfg.T_s
                window = self.rocof_hist[-self.deact_win:]
                if (self.k_act is not None
                        and k - self.k_act >= self.deact_win
                        and should_deactivate(np.abs(window), cfg.deact_margin)):
                    ctrl.deactivate(t)
                    self.next_sample = None
        return inc


def _run_reduced(scenario: Scenario, case: GridCase) -> ScenarioResult:
    tic = time.perf_counter()
    cfg = scenario.mpc
    dt = scenario.dt()
    mm = assemble(case)
    dss = discretize_zoh(mm.ss, dt)
    n_c, n_g = mm.n_c, mm.n_g
    n_units = n_c + n_g
    n_n = case.network.n_n
    f_0 = mm.f_0

    n_steps = int(round(scenario.t_end / dt))
    t = np.arange(n_steps + 1) * dt

    # per-bus injection deviation from load-step disturbances
    p_l_steps = np.zeros((n_steps + 1, n_n))
    for d in scenario.disturbances:
        if d.kind != "load-step":
            raise NotImplementedError(
                "gen-loss disturbances are handled by run(), not _run_reduced")
        k0 = int(round(d.time / dt))
        p_l_steps[k0:, d.bus] += d.dp_mw / case.s_base

    coi = coi_from_fleet(case.sgs, case.vscs, s_base=case.s_base,
                         f_b=case.f_b, f_0=f_0)

    controllers = []
    central = None
    if scenario.controller in ("decentralized", "decentralized-explicit"):
        explicit = scenario.controller == "decentralized-explicit"
        for i in range(n_c):
            ctrl = DecentralizedController(coi, case.vscs[i], i, cfg,
                                           case.s_base)
            controllers.append(_DecentralizedSupervisor(
                ctrl, coi.M, cfg, dt, f_0, explicit=explicit))
    elif scenario.controller == "centralized":
        central = CentralizedController(mm, cfg)

    x = np.zeros(mm.n_states)
    acc = np.zeros(n_c)             # applied setpoint deviations, system p.u.
    soc = np.array([u.soc0 for u in case.vscs]) if n_c else np.zeros(0)
    # power-measurement front end of the RoCoF estimator: first-order lag
    p_meas = np.zeros(n_c)
    meas_alpha = np.array([
        1.0 - np.exp(-dt / u.meas_lag) if u.meas_lag > 0 else 1.0
        for u in case.vscs]) if n_c else np.zeros(0)

    freqs = np.empty((n_steps + 1, n_units))
    flows = np.empty((n_steps + 1, case.network.n_b))
    p_vsc = np.empty((n_steps + 1, n_c))
    soc_tr = np.empty((n_steps + 1, n_c))
    dp_tr = np.empty((n_steps + 1, n_c))
    events: list[ControlEvent] = []

    central_next = None
    central_k_act = None
    sched = case.p_sched()

    for k in range(n_steps + 1):
        p_l = p_l_steps[k]
        u_in = np.concatenate([acc, p_l])
        y = dss.C @ x + dss.D @ u_in
        freqs[k] = y[:n_units] + f_0
        flows[k] = y[n_units:] + mm.p_b0
        dp_unit = mm.unit_powers(x, p_l)
        for i in range(n_c):
            sc = case.s_base / case.vscs[i].rating_mw
            p_vsc[k, i] = case.vscs[i].p_c_star + dp_unit[i] * sc
        soc_tr[k] = soc
        dp_tr[k] = acc

        # internal RoCoF signal with the measured power lagging the plant
        rocof_pu = np.empty(n_c)
        for i in range(n_c):
            pt = x[mm.state_index[("vsc", i, "p_tilde")]]
            rocof_pu[i] = mm.rp_sys(i) * case.vscs[i].omega_f * (pt - p_meas[i])

        # decentralized supervision per unit
        for i, sup in enumerate(controllers):
            inc = sup.observe(k, t[k], rocof_pu[i], freqs, i, soc[i], p_vsc[k, i])
            acc[i] += inc

        # centralized supervision
        if central is not None:
            if central.state.mode == "idle":
                measured = sched + p_l
                on, p_l_est = trigger_centralized(measured, sched,
                                                  cfg.detect_threshold)
                if on:
                    lag = max(1, int(round(cfg.T_s / dt)))
                    central.activate(t[k], p_l_est, freqs[max(0, k - lag)])
                    central_next = t[k]
                    central_k_act = k
            if central.state.mode == "active" and central_next is not None \
                    and t[k] >= central_next - 1e-12:
                moves = central.step(t[k], x, freqs[k], soc, p_vsc[k])
                acc = acc + moves
                central_next += cfg.T_s
                lag = max(1, int(round(cfg.deact_window / dt)))
                if central_k_act is not None and k - central_k_act >= lag:
                    window_ok = np.all(
                        np.abs(freqs[k] - freqs[k - lag]) / (lag * dt)
                        < cfg.deact_margin)
                    if window_ok:
                        central.deactivate(t[k])
                        central_next = None

        if k == n_steps:
            break
        # battery bookkeeping with p_dc held at the schedule
        for i in range(n_c):
            soc[i] += dt * (case.vscs[i].p_c_star - p_vsc[k, i]) \
                / case.vscs[i].e_b_seconds()
        p_meas += meas_alpha * (dp_unit[:n_c] - p_meas)
        u_in = np.concatenate([acc, p_l])
        x = dss.A_d @ x + dss.B_d @ u_in

    for sup in controllers:
        events.extend(sup.ctrl.events)
    if central is not None:
        events.extend(central.events)
    events.sort(key=lambda e: e.t)

    rocof_avg = rocof_cycle_average(t, freqs)
    coi_freq = _coi_trace(case, freqs)
    runtime = time.perf_counter() - tic
    summary = _summarize(scenario, t, freqs, rocof_avg, coi_freq, events, f_0,
                         runtime)
    return ScenarioResult(
        scenario=scenario, case=case, t=t, freqs=freqs, rocof_avg=rocof_avg,
        coi_freq=coi_freq, flows=flows, p_vsc=p_vsc, soc=soc_tr, dp_cmd=dp_tr,
        v_dc=None, i_dc=None, events=events, summary=summary,
    )


def _run_detailed(scenario: Scenario, case: GridCase) -> ScenarioResult:
    """Hybrid plant: third-order SGs + DC network (reduced) with full
    converter ODE models injecting power at their buses."""
    tic = time.perf_counter()
    cfg = scenario.mpc
    dt = scenario.dt()
    n_c = case.n_vsc
    if n_c == 0:
        raise ValueError("detailed fidelity needs at least one converter")

    # SG-only reduced model; converter injections ride the p_l input channel
    p_load_adj = case.p_load.copy()
    for i, u in enumerate(case.vscs):
        p_load_adj[u.bus] -= u.p_c_star * u.rating_mw / case.s_base
    sg_case = replace(case, vscs=(), p_load=p_load_adj)
    mm = assemble(sg_case)
    f_0 = mm.f_0
    n_g = mm.n_g
    n_units = n_c + n_g
    n_n = case.network.n_n
    A_sg = mm.ss.A
    B_sg = mm.ss.B[:, :]  # inputs: (0 converters) + p_l columns
    # bus-angle reconstruction for converter terminals
    theta_rows = mm.theta_rows

    devices = [u.device() for u in case.vscs]
    dev_eq = [vd.equilibrium(devices[i], v_t_mag=1.0, soc0=case.vscs[i].soc0)
              for i in range(n_c)]

    # bus angles: rebuild the augmented reduction here for terminal angles
    x_int = [g.x_int for g in sg_case.sgs]
    N_aug = n_n + n_g
    L = np.zeros((N_aug, N_aug))
    L[:n_n, :n_n] = case.network.L
    for kk, (b, xk) in enumerate(zip([g.bus for g in sg_case.sgs], x_int)):
        gcond = 1.0 / xk
        i_node = n_n + kk
        L[i_node, i_node] += gcond
        L[b, b] += gcond
        L[i_node, b] -= gcond
        L[b, i_node] -= gcond
    L_FF_inv = np.linalg.inv(L[:n_n, :n_n])
    T_state = -L_FF_inv @ L[:n_n, n_n:]
    T_load = L_FF_inv

    n_steps = int(round(scenario.t_end / dt))
    t = np.arange(n_steps + 1) * dt
    p_l_steps = np.zeros((n_steps + 1, n_n))
    for d in scenario.disturbances:
        k0 = int(round(d.time / dt))
        p_l_steps[k0:, d.bus] += d.dp_mw / case.s_base

    coi = coi_from_fleet(case.sgs, case.vscs, s_base=case.s_base,
                         f_b=case.f_b, f_0=f_0)
    controllers = []
    if scenario.controller in ("decentralized", "decentralized-explicit"):
        for i in range(n_c):
            ctrl = DecentralizedController(coi, case.vscs[i], i, cfg,
                                           case.s_base)
            controllers.append(_DecentralizedSupervisor(ctrl, coi.M, cfg, dt, f_0))
    elif scenario.controller == "centralized":
        raise NotImplementedError(
            "centralized control runs on the reduced plant model")

    x_sg = np.zeros(mm.n_states)
    x_dev = [eq.copy() for eq in dev_eq]
    acc = np.zeros(n_c)  # applied dp* per unit, converter p.u. via k_p share

    freqs = np.empty((n_steps + 1, n_units))
    flows = np.empty((n_steps + 1, case.network.n_b))
    p_vsc = np.empty((n_steps + 1, n_c))
    soc_tr = np.empty((n_steps + 1, n_c))
    dp_tr = np.empty((n_steps + 1, n_c))
    v_dc = np.empty((n_steps + 1, n_c))
    i_dc = np.empty((n_steps + 1, n_c))

    scales = np.array([u.rating_mw / case.s_base for u in case.vscs])
    vsc_buses = [u.bus for u in case.vscs]

    acc_conv = np.zeros(n_c)  # setpoint change seen by each device, conv p.u.

    def p_l_with_devices(k, xs_dev):
        p_l = p_l_steps[k].copy()
        for i in range(n_c):
            p_ci, _ = vd.power_measurements(xs_dev[i][vd.IDX_VF],
                                            xs_dev[i][vd.IDX_IG])
            p_l[vsc_buses[i]] += (p_ci - case.vscs[i].p_c_star) * scales[i]
        return p_l

    def derivatives(k, x_sg_c, xs_dev):
        p_l = p_l_with_devices(k, xs_dev)
        dx_sg = A_sg @ x_sg_c + B_sg @ np.concatenate([p_l])
        theta_bus = T_state @ x_sg_c[theta_rows] + T_load @ p_l
        dxs = []
        for i in range(n_c):
            delta = theta_bus[vsc_buses[i]]
            th_c = xs_dev[i][vd.IDX_TH]
            v_t = np.array([np.cos(delta - th_c), np.sin(delta - th_c)])
            dxi, _ = vd.device_derivatives(devices[i], xs_dev[i], v_t,
                                           dp_star=acc_conv[i], omega_ref=1.0)
            dxs.append(dxi)
        return dx_sg, dxs

    for k in range(n_steps + 1):
        p_l = p_l_with_devices(k, x_dev)
        theta_bus = T_state @ x_sg[theta_rows] + T_load @ p_l
        flows[k] = case.network.line_flows(theta_bus) + mm.p_b0
        rocof_pu = np.empty(n_c)
        for i in range(n_c):
            xi = x_dev[i]
            p_ci, q_ci = vd.power_measurements(xi[vd.IDX_VF], xi[vd.IDX_IG])
            omega_c, _, _, _ = vd.droop_outer(devices[i], xi[vd.IDX_PT],
                                              xi[vd.IDX_QT], p_ci, q_ci,
                                              acc_conv[i])
            freqs[k, i] = f_0 * omega_c
            p_vsc[k, i] = p_ci
            soc_tr[k, i] = xi[vd.IDX_SOC]
            v_dc[k, i] = xi[vd.IDX_VDC]
            i_dc_val, _ = vd.dc_pi(devices[i].gains, devices[i].dc,
                                   xi[vd.IDX_VDC], xi[vd.IDX_CHIDC],
                                   devices[i].i_dc_star())
            i_dc[k, i] = i_dc_val
            rocof_pu[i] = vd.rocof_state(devices[i], xi[vd.IDX_PT], p_ci)
        for j in range(n_g):
            freqs[k, n_c + j] = f_0 * (1.0 + x_sg[mm.state_index[("sg", j, "omega")]])
        dp_tr[k] = acc

        for i, sup in enumerate(controllers):
            inc = sup.observe(k, t[k], rocof_pu[i], freqs, i,
                              soc_tr[k, i], p_vsc[k, i])
            if inc:
                acc[i] += inc
                acc_conv[i] = acc[i] / scales[i]

        if k == n_steps:
            break
        # one RK4 step of the coupled system
        d1_sg, d1_dev = derivatives(k, x_sg, x_dev)
        s2_sg = x_sg + 0.5 * dt * d1_sg
        s2_dev = [x_dev[i] + 0.5 * dt * d1_dev[i] for i in range(n_c)]
        d2_sg, d2_dev = derivatives(k, s2_sg, s2_dev)
        s3_sg = x_sg + 0.5 * dt * d2_sg
        s3_dev = [x_dev[i] + 0.5 * dt * d2_dev[i] for i in range(n_c)]
        d3_sg, d3_dev = derivatives(k, s3_sg, s3_dev)
        s4_sg = x_sg + dt * d3_sg
        s4_dev = [x_dev[i] + dt * d3_dev[i] for i in range(n_c)]
        d4_sg, d4_dev = derivatives(k + 1, s4_sg, s4_dev)
        x_sg = x_sg + (dt / 6) * (d1_sg + 2 * d2_sg + 2 * d3_sg + d4_sg)
        for i in range(n_c):
            x_dev[i] = x_dev[i] + (dt / 6) * (d1_dev[i] + 2 * d2_dev[i]
                                              + 2 * d3_dev[i] + d4_dev[i])
            if not np.all(np.isfinite(x_dev[i])):
                raise vd.FaultEvent(f"vsc{i + 1} state non-finite at t={t[k]:.4f}")
            if x_dev[i][vd.IDX_VDC] <= 0:
                raise vd.FaultEvent(f"vsc{i + 1} DC voltage collapse at t={t[k]:.4f}")

    events = []
    for sup in controllers:
        events.extend(sup.ctrl.events)
    events.sort(key=lambda e: e.t)
    rocof_avg = rocof_cycle_average(t, freqs)
    coi_freq = _coi_trace(case, freqs)
    runtime = time.perf_counter() - tic
    summary = _summarize(scenario, t, freqs, rocof_avg, coi_freq, events, f_0,
                         runtime)
    return ScenarioResult(
        scenario=scenario, case=case, t=t, freqs=freqs, rocof_avg=rocof_avg,
        coi_freq=coi_freq, flows=flows, p_vsc=p_vsc, soc=soc_tr, dp_cmd=dp_tr,
        v_dc=v_dc, i_dc=i_dc, events=events, summary=summary,
    )


def _apply_gen_loss(scenario: Scenario, case: GridCase):
    """Translate gen-loss events into load steps on a case without the unit."""
    new_dist = []
    new_case = case
    for d in scenario.disturbances:
        if d.kind != "gen-loss":
            new_dist.append(d)
            continue
        sg = next((g for g in new_case.sgs if g.bus == d.bus), None)
        if sg is None:
            raise ValueError(f"gen-loss at bus {d.bus + 1}: no SG there")
        sgs = tuple(g for g in new_case.sgs if g.bus != d.bus)
        p_load = new_case.p_load.copy()
        p_load[d.bus] -= sg.p_m_star  # keep the case balanced
        new_case = replace(new_case, sgs=sgs, p_load=p_load)
        new_dist.append(Disturbance(time=d.time, bus=d.bus,
                                    dp_mw=-sg.p_m_star * new_case.s_base,
                                    kind="load-step"))
    return replace(scenario, disturbances=tuple(new_dist)), new_case


def run(scenario: Scenario, case: GridCase | None = None) -> ScenarioResult:
    """Deterministic closed-loop run of one scenario."""
    if case is None:
        path = scenario.case_path
        if str(path) == "bundled":
            path = bundled_case_path()
        case = load_case(path)
    for d in scenario.disturbances:
        if not (0 <= d.bus < case.network.n_n):
            raise ValueError(f"disturbance bus {d.bus + 1} not in the case")
    if any(d.kind == "gen-loss" for d in scenario.disturbances):
        scenario, case = _apply_gen_loss(scenario, case)
    if scenario.fidelity == "reduced":
        return _run_reduced(scenario, case)
    return _run_detailed(scenario, case)


def run_matrix(template: Scenario, buses, magnitudes_mw, controllers,
               case: GridCase | None = None):
    """Sweep disturbance locations/magnitudes/controller modes.

    Returns (results dict keyed by (bus, mw, mode), summary rows).  Cell
    failures are recorded and the sweep continues.
    """
    results = {}
    rows = []
    for bus in buses:
        for mw in magnitudes_mw:
            for mode in controllers:
                scen = replace(
                    template, controller=mode,
                    label=f"bus{bus}_{mode}",
                    disturbances=tuple(
                        Disturbance(time=d.time, bus=bus - 1, dp_mw=mw,
                                    kind="load-step")
                        for d in template.disturbances) or (
                        Disturbance(time=0.5, bus=bus - 1, dp_mw=mw),),
                )
                key = (bus, mw, mode)
                try:
                    res = run(scen, case=case)
                    results[key] = res
                    row = {"bus": bus, "dp_mw": mw, "mode": mode}
                    row.update({k: v for k, v in res.summary.items()
                                if k not in ("label", "controller", "fidelity")})
                    rows.append(row)
                except Exception as exc:  # sweep continues per spec
                    rows.append({"bus": bus, "dp_mw": mw, "mode": mode,
                                 "error": str(exc)})
    return results, rows


# ---------------------------------------------------------------------------
# CSV export


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    arr = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def export(result: ScenarioResult, outdir) -> list[Path]:
    """Write traces.csv, events.csv, summary.csv and figure-data files."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    names = result.unit_names
    n_c = result.case.n_vsc

    header = ["t"]
    cols = [result.t]
    for j, nm in enumerate(names):
        header.append(f"f_{nm}_hz")
        cols.append(result.freqs[:, j])
    for j, nm in enumerate(names):
        header.append(f"rocof_{nm}_hzps")
        cols.append(result.rocof_avg[:, j])
    for i in range(n_c):
        header += [f"p_vsc{i + 1}_pu", f"soc_vsc{i + 1}", f"dp_cmd_vsc{i + 1}_pu"]
        cols += [result.p_vsc[:, i], result.soc[:, i], result.dp_cmd[:, i]]
    for kb in range(result.flows.shape[1]):
        header.append(f"p_branch{kb + 1}_pu")
        cols.append(result.flows[:, kb])
    if result.v_dc is not None:
        for i in range(n_c):
            header += [f"v_dc_vsc{i + 1}_pu", f"i_dc_vsc{i + 1}_pu"]
            cols += [result.v_dc[:, i], result.i_dc[:, i]]
    path = outdir / "traces.csv"
    _write_csv(path, header, cols)
    written.append(path)

    path = outdir / "events.csv"
    with open(path, "w") as fh:
        fh.write("t,source,kind,detail,value\n")
        for e in result.events:
            detail = e.detail.replace(",", ";")
            fh.write(f"{e.t!r},{e.source},{e.kind},{detail},{e.value!r}\n")
    written.append(path)

    path = outdir / "summary.csv"
    keys = list(result.summary.keys())
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(str(result.summary[k]) for k in keys) + "\n")
    written.append(path)

    # figure data: frequency panel (+ worst-case no-FFC reference if attached)
    header = ["t"] + [f"f_{nm}_hz" for nm in names]
    cols = [result.t] + [result.freqs[:, j] for j in range(len(names))]
    if result.baseline is not None:
        header.append("f_worst_noffc_hz")
        cols.append(result.baseline.freqs.min(axis=1))
    path = outdir / "fig_frequency.csv"
    _write_csv(path, header, cols)
    written.append(path)

    header = ["t"] + [f"p_vsc{i + 1}_pu" for i in range(n_c)]
    cols = [result.t] + [result.p_vsc[:, i] for i in range(n_c)]
    path = outdir / "fig_active_power.csv"
    _write_csv(path, header, cols)
    written.append(path)

    if result.v_dc is not None:
        header = ["t"]
        cols = [result.t]
        for i in range(n_c):
            header += [f"v_dc_vsc{i + 1}_pu", f"i_dc_vsc{i + 1}_pu",
                       f"soc_vsc{i + 1}"]
            cols += [result.v_dc[:, i], result.i_dc[:, i], result.soc[:, i]]
        path = outdir / "fig_dc_side.csv"
        _write_csv(path, header, cols)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# scenario files


def load_scenario(path) -> Scenario:
    """Parse a scenario file (structured text, same syntax as case files)."""
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    sc = doc.get("scenario", {})
    mpc_tbl = sc.pop("mpc", {})
    dists = []
    for row in doc.get("disturbance", []):
        dists.append(Disturbance(
            time=float(row["t"]), bus=int(row["bus"]) - 1,
            dp_mw=float(row.get("dp_mw", 0.0)),
            kind=str(row.get("kind", "load-step")),
        ))
    known = {"case", "fidelity", "controller", "t_end", "dt_plant", "seed",
             "label"}
    unknown = set(sc) - known
    if unknown:
        raise ValueError(f"[scenario]: unknown field(s) {sorted(unknown)}")
    return Scenario(
        case_path=sc.get("case", "bundled"),
        fidelity=sc.get("fidelity", "reduced"),
        controller=sc.get("controller", "none"),
        disturbances=tuple(dists),
        t_end=float(sc.get("t_end", 10.0)),
        dt_plant=float(sc["dt_plant"]) if "dt_plant" in sc else None,
        mpc=MpcConfig(**mpc_tbl),
        seed=int(sc.get("seed", 0)),
        label=str(sc.get("label", "")),
    )
