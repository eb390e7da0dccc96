"""Supervisory fast-frequency-control layer: trigger/deactivation logic,
assembly of the decentralized (CoI-model) and centralized (multi-machine)
LPs, and the receding-horizon controllers.

Conventions: the decentralized decision variable is the fleet-total setpoint
change per step in system p.u.; each unit applies its participation share
k_p of its own solution.  Frequencies are in Hz inside the LPs; device
constraints are converter per-unit.  A positive disturbance estimate means a
power deficit and enters the prediction model with a negative sign (the
aggregate model maps positive power injection to positive frequency
deviation).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coi import CoiParams, coi_state_space
from .lp import LpStandard, PwaLaw, eval_explicit, solve_lp, solve_mplp
from .network import VscUnitParams
from .reduced import MultiMachineSS
from .statespace import discretize_zoh

__all__ = [
    "MpcConfig",
    "ControllerState",
    "trigger_decentralized",
    "should_deactivate",
    "trigger_centralized",
    "FfcLp",
    "build_decentralized",
    "build_centralized",
    "default_param_box",
    "DecentralizedController",
    "CentralizedController",
]


def geometric_cost(base: float = 1.0, ratio: float = 1.5):
    """Default per-step control-cost schedule C_P(k) = base * ratio^k."""
    def cost(k: int) -> float:
        return base * ratio**k
    return cost


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, limits, costs and trigger settings of the FFC layer."""

    N: int = 3
    T_s: float = 0.25
    f_min: float = 49.5
    f_max: float = 50.5
    rocof_min: float = -1.0   # Hz/s
    rocof_max: float = 1.0
    cost_ratio: float = 1.5
    cost_base: float = 1.0
    C_H: float = 1e5
    deadband: float = 0.1           # Hz/s on the averaged internal RoCoF
    trigger_window: float = 0.010   # s, estimation/averaging window
    deact_margin: float = 0.03      # Hz/s
    deact_window: float = 0.5       # s
    detect_threshold: float = 0.5   # p.u., centralized |p_l| trigger
    guard_hz: float = 0.2           # internal tightening of the f band
    droop_term_literal: bool = False  # strict Eq.(13e) printing if True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon N must be >= 1")
        if self.T_s <= 0:
            raise ValueError("sampling period must be > 0")
        if self.f_min >= self.f_max:
            raise ValueError("frequency limits must satisfy f_min < f_max")
        if self.cost_ratio < 1.0:
            raise ValueError("cost schedule must be non-decreasing in k")
        if self.C_H <= self.C_P(self.N):
            raise ValueError("slack penalty C_H must dominate the control costs")

    def C_P(self, k: int) -> float:
        return self.cost_base * self.cost_ratio**k


@dataclass
class ControllerState:
    """Mutable bookkeeping of one controller instance."""

    mode: str = "idle"                  # idle | active
    acc: np.ndarray | None = None       # accumulated applied moves (system p.u.)
    last_applied: np.ndarray | None = None
    dP_hat: float = 0.0                 # decentralized deficit estimate
    p_l: np.ndarray | None = None       # centralized injection-deviation vector
    f_prev: np.ndarray | None = None    # previous-step frequencies (Hz)


# ---------------------------------------------------------------------------
# triggers


def trigger_decentralized(rocof_window, deadband: float) -> bool:
    """Activate when the averaged internal RoCoF leaves the deadband.

    rocof_window holds the RoCoF samples (Hz/s) of the averaging window.
    """
    window = np.asarray(rocof_window, dtype=float)
    if window.size == 0:
        return False
    return bool(abs(window.mean()) > deadband)


def should_deactivate(rocof_window, margin: float) -> bool:
    """Deactivate once the windowed average |RoCoF| is back below margin."""
    window = np.asarray(rocof_window, dtype=float)
    if window.size == 0:
        return False
    return bool(abs(window.mean()) < margin)


def trigger_centralized(measured, scheduled, threshold: float):
    """Compare per-bus injections to schedule; returns (activate, p_l)."""
    measured = np.asarray(measured, dtype=float)
    scheduled = np.asarray(scheduled, dtype=float)
    if measured.shape != scheduled.shape:
        raise ValueError(
            f"injection vectors disagree: {measured.shape} vs {scheduled.shape}"
        )
    p_l = measured - scheduled
    return bool(np.max(np.abs(p_l)) > threshold), p_l


# ---------------------------------------------------------------------------
# decentralized LP (parametric in l = (x1, x2, chi, p_c))


@dataclass(frozen=True)
class FfcLp:
    """Assembled FFC optimization instance plus variable-layout metadata."""

    lp: LpStandard
    N: int
    n_moves: int  # N + 1

    @property
    def first_move_vars(self) -> tuple[int, int]:
        return 0, self.n_moves

    def first_move(self, z: np.ndarray) -> float:
        pos, neg = self.first_move_vars
        return float(z[pos] - z[neg])


def build_decentralized(coi: CoiParams, vsc: VscUnitParams, cfg: MpcConfig,
                        dP_hat: float, s_base: float,
                        u_const: float = 0.0) -> FfcLp:
    """Decentralized FFC problem: fleet-total moves against the CoI model.

    Parameter embedding l = (x1, x2, chi(k), p_c(k)) so the same instance
    serves the online controller and the explicit mp-LP.  dP_hat is the
    locally estimated deficit (positive = missing power); u_const carries any
    already-committed fleet setpoint level (system p.u.).
    """
    N = cfg.N
    nm = N + 1
    ss = discretize_zoh(coi_state_space(coi), cfg.T_s)
    A_d, B_d = ss.A_d, ss.B_d[:, 0]
    C = ss.C[0]
    f_b, f_0 = coi.f_b, coi.f_0

    # f(j) = g[j] @ x0 + sum_r h[j][r] * dp_r + const[j] + f_0
    g = [f_b * C.copy()]
    h = [np.zeros(nm)]
    const = [0.0]
    Apow = [np.eye(2)]
    for _ in range(N):
        Apow.append(A_d @ Apow[-1])
    drive = u_const - dP_hat
    for j in range(1, N + 1):
        g.append(f_b * C @ Apow[j])
        hj = np.zeros(nm)
        cj = 0.0
        for r in range(j):
            gain = f_b * float(C @ (Apow[j - 1 - r] @ B_d))
            if r < nm:
                hj[r] = gain
            cj += gain * drive
        h.append(hj)
        const.append(cj)

    n_vars = 2 * nm + 2
    i_eta_f = 2 * nm
    i_eta_r = 2 * nm + 1
    c = np.zeros(n_vars)
    for j in range(nm):
        c[j] = cfg.C_P(j)
        c[nm + j] = cfg.C_P(j)
    c[i_eta_f] = cfg.C_H
    c[i_eta_r] = cfg.C_H

    scale = s_base / vsc.rating_mw       # system p.u. -> converter p.u.
    kscale = vsc.k_p * scale             # applied share of a fleet move
    spike = f_b * vsc.rp * kscale        # Hz per system-p.u. fleet move

    rows_A, rows_b, rows_S = [], [], []

    def add_row(dp_coef, eta_idx, eta_coef, rhs, x_coef, chi_coef, p_coef):
        row = np.zeros(n_vars)
        row[:nm] = dp_coef
        row[nm:2 * nm] = -dp_coef
        if eta_idx is not None:
            row[eta_idx] = eta_coef
        rows_A.append(row)
        rows_b.append(rhs)
        rows_S.append(np.array([x_coef[0], x_coef[1], chi_coef, p_coef]))

    # frequency and RoCoF limits with shared slacks, predicted steps 1..N
    f_hi = cfg.f_max - cfg.guard_hz
    f_lo = cfg.f_min + cfg.guard_hz
    for j in range(1, N + 1):
        add_row(h[j], i_eta_f, -1.0, f_hi - f_0 - const[j], -g[j], 0.0, 0.0)
        add_row(-h[j], i_eta_f, -1.0, -(f_lo - f_0) + const[j], g[j], 0.0, 0.0)
        dh = (h[j] - h[j - 1]) / cfg.T_s
        dg = (g[j] - g[j - 1]) / cfg.T_s
        dconst = (const[j] - const[j - 1]) / cfg.T_s
        add_row(dh, i_eta_r, -1.0, cfg.rocof_max - dconst, -dg, 0.0, 0.0)
        add_row(-dh, i_eta_r, -1.0, -cfg.rocof_min + dconst, dg, 0.0, 0.0)

    # droop-spike guard on the local frequency, steps 0..N (hard)
    for j in range(N + 1):
        coef = h[j].copy()
        coef[j] += spike
        add_row(coef, None, 0.0, cfg.f_max - f_0 - const[j], -g[j], 0.0, 0.0)
        add_row(-coef, None, 0.0, -(cfg.f_min - f_0) + const[j], g[j], 0.0, 0.0)

    # converter power including droop feedback, steps 0..N (converter p.u.)
    # p_c(j) = p_meas + kscale * sum_{r<=j} dp_r + droop(f(0) - f(j))
    droop_gain = (vsc.rp / f_b if cfg.droop_term_literal
                  else 1.0 / (vsc.rp * f_b))
    p_rows = []
    for j in range(N + 1):
        coef = np.zeros(nm)
        coef[:j + 1] = kscale
        coef -= droop_gain * h[j]
        xc = droop_gain * (g[0] - g[j])
        cshift = -droop_gain * const[j]
        p_rows.append((coef, xc, cshift))
        add_row(coef, None, 0.0, vsc.p_max - cshift, -xc, 0.0, -1.0)
        add_row(-coef, None, 0.0, -vsc.p_min + cshift, xc, 0.0, 1.0)

    # battery SoC recursion chi(m) = chi + (T_s/E_b) sum_{j<m} (p* - p_c(j))
    e_b = vsc.e_b_seconds()
    soc_gain = cfg.T_s / e_b
    run_coef = np.zeros(nm)
    run_x = np.zeros(2)
    run_c = 0.0
    run_p = 0.0
    for m in range(1, N + 2):
        coef_j, xc_j, cs_j = p_rows[m - 1]
        run_coef -= soc_gain * coef_j
        run_x -= soc_gain * xc_j
        run_c -= soc_gain * cs_j
        run_p -= soc_gain  # coefficient of p_meas inside p_c(j)
        run_c += soc_gain * vsc.p_c_star
        add_row(run_coef, None, 0.0, vsc.soc_max - run_c, -run_x, -1.0, -run_p)
        add_row(-run_coef, None, 0.0, -vsc.soc_min + run_c, run_x, 1.0, run_p)

    lp = LpStandard(
        c=c, A_ub=np.vstack(rows_A), b_ub=np.array(rows_b),
        lb=np.zeros(n_vars), S_ub=np.vstack(rows_S),
    )
    return FfcLp(lp=lp, N=N, n_moves=nm)


def default_param_box(coi: CoiParams, vsc: VscUnitParams, cfg: MpcConfig,
                      f_span: float = 1.5):
    """Parameter box for the explicit law, derived from the constraint limits.

    The model-state ranges cover frequency deviations of +-f_span Hz split
    across the two canonical states; SoC and power use the device limits.
    """
    ss = coi_state_space(coi)
    C = ss.C[0]
    df = f_span / coi.f_b
    lo = np.array([-0.5 * df / abs(C[0]), -0.5 * df / abs(C[1]),
                   vsc.soc_min, vsc.p_min])
    hi = np.array([0.5 * df / abs(C[0]), 0.5 * df / abs(C[1]),
                   vsc.soc_max, vsc.p_max])
    return lo, hi


# ---------------------------------------------------------------------------
# centralized LP (built per step; state enters directly)


def build_centralized(mmss: MultiMachineSS, cfg: MpcConfig, x0, p_l,
                      f_prev, soc_now, p_now, acc_prev) -> FfcLp:
    """Centralized FFC problem over all converters and network outputs.

    x0 is the current reduced-model state estimate; p_l the measured per-bus
    injection deviation (held constant over the horizon); f_prev the
    previous-sample unit frequencies (Hz); soc_now/p_now the converter SoC
    and power measurements (converter p.u.); acc_prev the accumulated applied
    moves per converter (system p.u.).
    """
    case = mmss.case
    n_c, n_g = mmss.n_c, mmss.n_g
    n_units = n_c + n_g
    n_b = case.network.n_b
    N = cfg.N
    nm = N + 1
    dss = discretize_zoh(mmss.ss, cfg.T_s)
    A_d, B_d, C, D = dss.A_d, dss.B_d, dss.C, dss.D
    f_0 = mmss.f_0

    x0 = np.asarray(x0, dtype=float).reshape(-1)
    p_l = np.asarray(p_l, dtype=float).reshape(-1)
    f_prev = np.asarray(f_prev, dtype=float).reshape(-1)
    acc_prev = np.asarray(acc_prev, dtype=float).reshape(-1)

    # decision layout: dp+[i, j], dp-[i, j] (unit-major), then slacks
    n_mv = n_c * nm
    i_eta_f = 2 * n_mv
    i_eta_r = 2 * n_mv + 1
    n_vars = 2 * n_mv + 2

    def mv(i, j):
        return i * nm + j

    # u(j) = u_base + sum over decided increments up to j
    u_base = np.concatenate([acc_prev, p_l])

    # x(j) affine in decisions: x(j) = xc[j] + Xd[j] @ dp   (dp = dp+ - dp-)
    xc = [x0]
    Xd = [np.zeros((mmss.n_states, n_mv))]
    Bc = B_d[:, :n_c]
    for j in range(N):
        new_c = A_d @ xc[j] + B_d @ u_base
        new_d = A_d @ Xd[j]
        new_d = new_d.copy()
        for i in range(n_c):
            for r in range(j + 1):
                new_d[:, mv(i, r)] += Bc[:, i]
        xc.append(new_c)
        Xd.append(new_d)

    # y(j) = yc[j] + Yd[j] @ dp (+ anchors)
    yc, Yd = [], []
    Dc = D[:, :n_c]
    for j in range(N + 1):
        base = C @ xc[j] + D @ u_base
        dmat = C @ Xd[j]
        dmat = dmat.copy()
        for i in range(n_c):
            for r in range(j + 1):
                dmat[:, mv(i, r)] += Dc[:, i]
        yc.append(base)
        Yd.append(dmat)

    c = np.zeros(n_vars)
    for i in range(n_c):
        for j in range(nm):
            c[mv(i, j)] = cfg.C_P(j)
            c[n_mv + mv(i, j)] = cfg.C_P(j)
    c[i_eta_f] = cfg.C_H
    c[i_eta_r] = cfg.C_H

    rows_A, rows_b = [], []

    def add_row(dp_coef, eta_idx, eta_coef, rhs):
        row = np.zeros(n_vars)
        row[:n_mv] = dp_coef
        row[n_mv:2 * n_mv] = -dp_coef
        if eta_idx is not None:
            row[eta_idx] = eta_coef
        rows_A.append(row)
        rows_b.append(rhs)

    # frequency/RoCoF limits on every unit, steps 1..N (shared slacks)
    f_hi = cfg.f_max - cfg.guard_hz
    f_lo = cfg.f_min + cfg.guard_hz
    for j in range(1, N + 1):
        for unit in range(n_units):
            fr = Yd[j][unit]
            fc = yc[j][unit] + f_0
            add_row(fr, i_eta_f, -1.0, f_hi - fc)
            add_row(-fr, i_eta_f, -1.0, fc - f_lo)
            if j == 1:
                prev_r = np.zeros(n_mv)
                prev_c = f_prev[unit]
            else:
                prev_r = Yd[j - 1][unit]
                prev_c = yc[j - 1][unit] + f_0
            dr = (fr - prev_r) / cfg.T_s
            dc = (fc - prev_c) / cfg.T_s
            add_row(dr, i_eta_r, -1.0, cfg.rocof_max - dc)
            add_row(-dr, i_eta_r, -1.0, dc - cfg.rocof_min)

    # droop-spike guard per converter, steps 0..N (hard)
    for j in range(N + 1):
        for i in range(n_c):
            u = case.vscs[i]
            spike = case.f_b * u.rp * (case.s_base / u.rating_mw)
            fr = Yd[j][i].copy()
            fr[mv(i, j)] += spike
            fc = yc[j][i] + f_0
            add_row(fr, None, 0.0, cfg.f_max - fc)
            add_row(-fr, None, 0.0, fc - cfg.f_min)

    # line-flow limits, steps 0..N (hard)
    lims = case.network.flow_limits()
    for j in range(N + 1):
        fl_r = Yd[j][n_units:]
        fl_c = yc[j][n_units:] + mmss.p_b0
        for kb in range(n_b):
            add_row(fl_r[kb], None, 0.0, lims[kb] - fl_c[kb])
            add_row(-fl_r[kb], None, 0.0, lims[kb] + fl_c[kb])

    # per-converter power and SoC constraints (converter p.u.)
    for i in range(n_c):
        u = case.vscs[i]
        scale = case.s_base / u.rating_mw
        droop_gain = (u.rp / case.f_b if cfg.droop_term_literal
                      else 1.0 / (u.rp * case.f_b))
        e_b = u.e_b_seconds()
        soc_gain = cfg.T_s / e_b
        run_r = np.zeros(n_mv)
        run_c = soc_now[i]
        for j in range(N + 1):
            # p_ci(j) = p_now + scale*sum_{r<=j} dp_i(r) + droop*(f_i(0)-f_i(j))
            pr = np.zeros(n_mv)
            for r in range(j + 1):
                pr[mv(i, r)] = scale
            pr -= droop_gain * (Yd[j][i] - Yd[0][i])
            pc = p_now[i] - droop_gain * (yc[j][i] - yc[0][i])
            add_row(pr, None, 0.0, u.p_max - pc)
            add_row(-pr, None, 0.0, pc - u.p_min)
            run_r -= soc_gain * pr
            run_c += soc_gain * (u.p_c_star - pc)
            add_row(run_r, None, 0.0, u.soc_max - run_c)
            add_row(-run_r, None, 0.0, run_c - u.soc_min)

    lp = LpStandard(c=c, A_ub=np.vstack(rows_A), b_ub=np.array(rows_b),
                    lb=np.zeros(n_vars))
    return FfcLp(lp=lp, N=N, n_moves=nm)


def centralized_first_moves(ffc: FfcLp, z: np.ndarray, n_c: int) -> np.ndarray:
    nm = ffc.n_moves
    n_mv = n_c * nm
    return np.array([z[i * nm] - z[n_mv + i * nm] for i in range(n_c)])


# ---------------------------------------------------------------------------
# receding-horizon controllers


@dataclass
class ControlEvent:
    t: float
    source: str
    kind: str     # activate | solve | apply | alarm | deactivate
    detail: str = ""
    value: float = 0.0


class DecentralizedController:
    """One per-converter FFC instance driven by local measurements only.

    The model state is re-anchored every step from the measured frequency
    and its finite difference; the LP is rebuilt only when the committed
    setpoint level changes (the instance is otherwise parametric).
    """

    def __init__(self, coi: CoiParams, vsc: VscUnitParams, unit_idx: int,
                 cfg: MpcConfig, s_base: float, law: PwaLaw | None = None):
        self.coi = coi
        self.vsc = vsc
        self.unit_idx = unit_idx
        self.cfg = cfg
        self.s_base = s_base
        self.law = law
        self.state = ControllerState(acc=np.zeros(1), last_applied=np.zeros(1))
        self.events: list[ControlEvent] = []
        ss = discretize_zoh(coi_state_space(coi), cfg.T_s)
        self._ss = ss
        self._obs = np.linalg.inv(np.vstack([ss.C, ss.C @ ss.A]))
        self._ffc: FfcLp | None = None
        self._ffc_u_const: float | None = None

    @property
    def name(self) -> str:
        return f"vsc{self.unit_idx + 1}"

    def activate(self, t: float, dP_hat: float, f_prev: float):
        self.state.mode = "active"
        self.state.dP_hat = dP_hat
        self.state.f_prev = np.array([f_prev])
        self.events.append(ControlEvent(t, self.name, "activate",
                                        f"dP_hat={dP_hat:.4f}", dP_hat))

    def deactivate(self, t: float):
        self.state.mode = "idle"
        self.events.append(ControlEvent(t, self.name, "deactivate"))

    def attach_explicit_law(self, t: float = 0.0,
                            max_regions: int = 20_000) -> PwaLaw:
        """Generate the explicit piecewise-affine law for the current
        disturbance estimate and use it for subsequent steps."""
        ffc = build_decentralized(self.coi, self.vsc, self.cfg,
                                  self.state.dP_hat, self.s_base,
                                  u_const=float(self.state.acc[0]))
        lo, hi = default_param_box(self.coi, self.vsc, self.cfg)
        t0 = time.perf_counter()
        law = solve_mplp(ffc.lp, lo, hi,
                         output_indices=ffc.first_move_vars,
                         max_regions=max_regions)
        gen_s = time.perf_counter() - t0
        self.law = law
        self.events.append(ControlEvent(
            t, self.name, "solve",
            f"mplp {law.report['n_regions']} regions in {gen_s:.2f} s", gen_s))
        return law

    def estimate_state(self, f_meas: float, fdot_meas: float) -> np.ndarray:
        """Invert (f, fdot) measurements into the canonical model state."""
        ss = self._ss
        u_now = float(self.state.acc[0]) - self.state.dP_hat
        df = (f_meas - self.coi.f_0) / self.coi.f_b
        dfdot = fdot_meas / self.coi.f_b - float(ss.C @ ss.B) * u_now
        return self._obs @ np.array([df, dfdot])

    def step(self, t: float, f_meas: float, soc: float, p_c_conv: float,
             rocof_meas: float | None = None) -> float:
        """One MPC sample: returns the applied setpoint change (system p.u.).

        rocof_meas is the unit's internal RoCoF signal in Hz/s; when absent
        the finite difference of the sampled frequency is used instead.
        """
        if self.state.mode != "active":
            return 0.0
        cfg = self.cfg
        if rocof_meas is None:
            rocof_meas = (f_meas - float(self.state.f_prev[0])) / cfg.T_s
        x_hat = self.estimate_state(f_meas, rocof_meas)
        l = np.array([x_hat[0], x_hat[1], soc, p_c_conv])

        dp_total = None
        if self.law is not None:
            t0 = time.perf_counter()
            val = eval_explicit(self.law, l)
            dt_ms = (time.perf_counter() - t0) * 1e3
            if val is not None:
                dp_total = float(val[0] - val[1])
                self.events.append(ControlEvent(t, self.name, "solve",
                                                f"explicit {dt_ms:.3f} ms",
                                                dt_ms))
        if dp_total is None:
            u_const = float(self.state.acc[0])
            if self._ffc is None or self._ffc_u_const != u_const:
                self._ffc = build_decentralized(
                    self.coi, self.vsc, cfg, self.state.dP_hat,
                    self.s_base, u_const=u_const)
                self._ffc_u_const = u_const
            t0 = time.perf_counter()
            sol = solve_lp(self._ffc.lp, l=l)
            dt_ms = (time.perf_counter() - t0) * 1e3
            if sol.status != "optimal":
                self.events.append(ControlEvent(t, self.name, "alarm",
                                                f"solver status {sol.status}"))
                self.state.f_prev = np.array([f_meas])
                return 0.0
            dp_total = self._ffc.first_move(sol.z)
            self.events.append(ControlEvent(t, self.name, "solve",
                                            f"online {dt_ms:.3f} ms", dt_ms))

        applied = self.vsc.k_p * dp_total
        self.state.acc = self.state.acc + applied
        self.state.last_applied = np.array([applied])
        self.state.f_prev = np.array([f_meas])
        self.events.append(ControlEvent(t, self.name, "apply",
                                        f"dp_total={dp_total:.4f}", applied))
        return float(applied)


class CentralizedController:
    """Wide-area FFC instance commanding every converter."""

    def __init__(self, mmss: MultiMachineSS, cfg: MpcConfig):
        self.mmss = mmss
        self.cfg = cfg
        n_c = mmss.n_c
        self.state = ControllerState(acc=np.zeros(n_c),
                                     last_applied=np.zeros(n_c))
        self.events: list[ControlEvent] = []

    @property
    def name(self) -> str:
        return "central"

    def activate(self, t: float, p_l: np.ndarray, f_prev: np.ndarray):
        self.state.mode = "active"
        self.state.p_l = np.array(p_l, dtype=float)
        self.state.f_prev = np.array(f_prev, dtype=float)
        self.events.append(ControlEvent(t, self.name, "activate",
                                        f"|p_l|max={np.max(np.abs(p_l)):.3f}"))

    def deactivate(self, t: float):
        self.state.mode = "idle"
        self.events.append(ControlEvent(t, self.name, "deactivate"))

    def step(self, t: float, x_plant: np.ndarray, f_meas: np.ndarray,
             soc: np.ndarray, p_c_conv: np.ndarray) -> np.ndarray:
        """One MPC sample: returns applied per-unit moves (system p.u.)."""
        n_c = self.mmss.n_c
        if self.state.mode != "active":
            return np.zeros(n_c)
        t0 = time.perf_counter()
        ffc = build_centralized(self.mmss, self.cfg, x_plant, self.state.p_l,
                                self.state.f_prev, soc, p_c_conv,
                                self.state.acc)
        sol = solve_lp(ffc.lp)
        dt_ms = (time.perf_counter() - t0) * 1e3
        self.state.f_prev = np.array(f_meas, dtype=float)
        if sol.status != "optimal":
            self.events.append(ControlEvent(t, self.name, "alarm",
                                            f"solver status {sol.status}"))
            return np.zeros(n_c)
        moves = centralized_first_moves(ffc, sol.z, n_c)
        self.state.acc = self.state.acc + moves
        self.state.last_applied = moves.copy()
        self.events.append(ControlEvent(t, self.name, "solve",
                                        f"online {dt_ms:.1f} ms", dt_ms))
        self.events.append(ControlEvent(
            t, self.name, "apply",
            " ".join(f"{m:+.4f}" for m in moves), float(np.sum(np.abs(moves)))))
        return moves
