"""Reduced multi-machine prediction/simulation model: two-state droop
converters, third-order synchronous generators and DC power-flow network
coupling assembled into one LTI system.

State layout (deviations from the scheduled operating point):
    per converter i: (theta_ci [rad], p~_ci [system p.u.])
    per SG j:        (theta_sj [rad], w_sj [p.u.], p~_sj [system p.u.])
inputs  u = (dp*_c1..nc [system p.u. setpoint changes], p_l[1..n_n]
             [per-bus injection deviations, negative = deficit])
outputs y = (converter freq devs [Hz], SG freq devs [Hz], branch-flow devs
             [p.u.]), anchors (f_0, p_b0) added on simulation.

Each unit's angle state sits on an internal node behind its internal
reactance (machine transient + step-up for SGs, the transformer of the
detailed converter model for VSCs); network buses are then eliminated
algebraically.  Angle equations carry the omega_b factor (theta in rad,
speeds in p.u.).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import GridCase
from .statespace import LinearSS, discretize_zoh

__all__ = ["MultiMachineSS", "assemble", "simulate_discrete", "coi_of"]


@dataclass(frozen=True)
class MultiMachineSS:
    """Assembled LTI model with index maps and linearization anchors."""

    case: GridCase
    ss: LinearSS
    unit_buses: tuple[int, ...]          # converter buses then SG buses
    state_index: dict = field(repr=False, default=None)   # type: ignore[assignment]
    output_index: dict = field(repr=False, default=None)  # type: ignore[assignment]
    L_red: np.ndarray = field(repr=False, default=None)   # type: ignore[assignment]
    W: np.ndarray = field(repr=False, default=None)       # unit pickup from p_l
    f_0: float = 50.0
    p_b0: np.ndarray = field(default=None, repr=False)    # type: ignore[assignment]

    @property
    def n_c(self) -> int:
        return self.case.n_vsc

    @property
    def n_g(self) -> int:
        return self.case.n_sg

    @property
    def n_states(self) -> int:
        return self.ss.n_states

    def rp_sys(self, i: int) -> float:
        u = self.case.vscs[i]
        return u.rp * self.case.s_base / u.rating_mw

    @property
    def theta_rows(self) -> np.ndarray:
        rows = [self.state_index[("vsc", i, "theta")] for i in range(self.n_c)]
        rows += [self.state_index[("sg", j, "theta")] for j in range(self.n_g)]
        return np.array(rows, dtype=int)

    def unit_powers(self, x: np.ndarray, p_l: np.ndarray) -> np.ndarray:
        """Electrical power deviation of every unit (system p.u.)."""
        return self.L_red @ x[self.theta_rows] + self.W @ p_l

    def vsc_freq_dev(self, x: np.ndarray, dp_star: np.ndarray) -> np.ndarray:
        """Converter frequency deviations (p.u.) from droop on filtered power."""
        out = np.empty(self.n_c)
        for i in range(self.n_c):
            pt = x[self.state_index[("vsc", i, "p_tilde")]]
            out[i] = self.rp_sys(i) * (dp_star[i] - pt)
        return out

    def vsc_rocof(self, x: np.ndarray, p_l: np.ndarray) -> np.ndarray:
        """Internal RoCoF state of each converter (p.u./s)."""
        p_unit = self.unit_powers(x, p_l)
        out = np.empty(self.n_c)
        for i in range(self.n_c):
            pt = x[self.state_index[("vsc", i, "p_tilde")]]
            out[i] = self.rp_sys(i) * self.case.vscs[i].omega_f * (pt - p_unit[i])
        return out


def assemble(case: GridCase, f_0: float | None = None) -> MultiMachineSS:
    """Build the LTI model of a case; anchors come from the scheduled state."""
    n_c, n_g = case.n_vsc, case.n_sg
    if n_c + n_g == 0:
        raise ValueError("case has no units to assemble")
    n_n = case.network.n_n
    n_b = case.network.n_b
    wb = 2.0 * np.pi * case.f_b
    f_b = case.f_b
    if f_0 is None:
        f_0 = case.f_b

    unit_buses = [u.bus for u in case.vscs] + [g.bus for g in case.sgs]
    x_int = [u.x_int_sys(case.s_base) for u in case.vscs]
    x_int += [g.x_int for g in case.sgs]
    n_u = len(unit_buses)

    # augmented Laplacian: original buses 0..n_n-1 plus one internal node per
    # unit behind x_int; all original buses are eliminated algebraically
    N = n_n + n_u
    L = np.zeros((N, N))
    L[:n_n, :n_n] = case.network.L
    for k, (b, xk) in enumerate(zip(unit_buses, x_int)):
        g = 1.0 / xk
        i = n_n + k
        L[i, i] += g
        L[b, b] += g
        L[i, b] -= g
        L[b, i] -= g
    I_nodes = list(range(n_n, N))
    F_nodes = list(range(n_n))
    L_II = L[np.ix_(I_nodes, I_nodes)]
    L_IF = L[np.ix_(I_nodes, F_nodes)]
    L_FI = L[np.ix_(F_nodes, I_nodes)]
    L_FF = L[np.ix_(F_nodes, F_nodes)]
    try:
        L_FF_inv = np.linalg.inv(L_FF)
    except np.linalg.LinAlgError:
        raise ValueError("reduced Laplacian is singular; check connectivity") from None
    L_red = L_II - L_IF @ L_FF_inv @ L_FI
    # unit electrical power: p_unit = L_red theta_I + W p_l
    W = L_IF @ L_FF_inv
    # bus angles: theta_F = T_state theta_I + T_load p_l
    T_state = -L_FF_inv @ L_FI
    T_load = L_FF_inv

    n_x = 2 * n_c + 3 * n_g
    n_in = n_c + n_n
    n_y = n_c + n_g + n_b
    A = np.zeros((n_x, n_x))
    B = np.zeros((n_x, n_in))
    C = np.zeros((n_y, n_x))
    D = np.zeros((n_y, n_in))

    state_index = {}
    k = 0
    for i in range(n_c):
        state_index[("vsc", i, "theta")] = k
        state_index[("vsc", i, "p_tilde")] = k + 1
        k += 2
    for j in range(n_g):
        state_index[("sg", j, "theta")] = k
        state_index[("sg", j, "omega")] = k + 1
        state_index[("sg", j, "p_tilde")] = k + 2
        k += 3

    theta_rows = [state_index[("vsc", i, "theta")] for i in range(n_c)]
    theta_rows += [state_index[("sg", j, "theta")] for j in range(n_g)]

    def add_power(row_target, r, coeff):
        """Add coeff * (electrical power of unit r) to a state equation."""
        for rr, tr in enumerate(theta_rows):
            A[row_target, tr] += coeff * L_red[r, rr]
        B[row_target, n_c:] += coeff * W[r]

    for i in range(n_c):
        u = case.vscs[i]
        r_sys = u.rp * case.s_base / u.rating_mw
        th = state_index[("vsc", i, "theta")]
        pt = state_index[("vsc", i, "p_tilde")]
        A[th, pt] = -wb * r_sys
        B[th, i] = wb * r_sys
        A[pt, pt] = -u.omega_f
        add_power(pt, i, u.omega_f)

    for j in range(n_g):
        g = case.sgs[j]
        r = n_c + j
        th = state_index[("sg", j, "theta")]
        om = state_index[("sg", j, "omega")]
        pg = state_index[("sg", j, "p_tilde")]
        A[th, om] = wb
        A[om, om] = -g.D_s / g.M_s
        A[om, pg] = 1.0 / g.M_s
        add_power(om, r, -1.0 / g.M_s)
        A[pg, om] = -g.K_g / g.T_g
        A[pg, pg] = -1.0 / g.T_g

    # outputs: converter frequency deviations in Hz (droop feedthrough)
    for i in range(n_c):
        u = case.vscs[i]
        r_sys = u.rp * case.s_base / u.rating_mw
        pt = state_index[("vsc", i, "p_tilde")]
        C[i, pt] = -f_b * r_sys
        D[i, i] = f_b * r_sys
    for j in range(n_g):
        C[n_c + j, state_index[("sg", j, "omega")]] = f_b

    # branch flows: p_b = Xb G theta_F with bus angles reduced out
    XbG = case.network.Xb @ case.network.G
    flow_state = XbG @ T_state
    for rr, tr in enumerate(theta_rows):
        C[n_c + n_g:, tr] = flow_state[:, rr]
    D[n_c + n_g:, n_c:] = XbG @ T_load

    output_index = {}
    for i in range(n_c):
        output_index[f"f_vsc{i + 1}"] = i
    for j in range(n_g):
        output_index[f"f_sg{j + 1}"] = n_c + j
    for kb in range(n_b):
        output_index[f"p_branch{kb + 1}"] = n_c + n_g + kb

    ss = LinearSS(A=A, B=B, C=C, D=D)
    return MultiMachineSS(
        case=case, ss=ss, unit_buses=tuple(unit_buses),
        state_index=state_index, output_index=output_index,
        L_red=L_red, W=W, f_0=f_0, p_b0=case.base_flows(),
    )


def simulate_discrete(mmss: MultiMachineSS, x0, u_seq, T_s: float):
    """Discrete ZOH simulation; returns absolute unit frequencies and flows.

    u_seq has one row per step (n_c setpoint deviations then n_n load
    deviations); output row k corresponds to x(k), so row 0 is the initial
    condition under u(0).
    """
    dss = discretize_zoh(mmss.ss, T_s)
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if u_seq.shape[1] != mmss.ss.n_inputs:
        raise ValueError(
            f"u_seq has {u_seq.shape[1]} columns, expected {mmss.ss.n_inputs}"
        )
    N = u_seq.shape[0]
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != mmss.n_states:
        raise ValueError(f"x0 has {x.shape[0]} entries, expected {mmss.n_states}")
    n_units = mmss.n_c + mmss.n_g
    t = np.arange(N + 1) * T_s
    xs = np.empty((N + 1, x.shape[0]))
    ys = np.empty((N + 1, mmss.ss.n_outputs))
    xs[0] = x
    for k in range(N):
        ys[k] = dss.C @ xs[k] + dss.D @ u_seq[k]
        xs[k + 1] = dss.A_d @ xs[k] + dss.B_d @ u_seq[k]
    ys[N] = dss.C @ xs[N] + dss.D @ u_seq[-1]
    freqs = ys[:, :n_units] + mmss.f_0
    flows = ys[:, n_units:] + mmss.p_b0
    return {"t": t, "x": xs, "freqs": freqs, "flows": flows}


def coi_of(mmss: MultiMachineSS, freqs: np.ndarray) -> np.ndarray:
    """Inertia-weighted aggregate frequency of a unit-frequency trace matrix.

    SGs weigh in with M_s; converters with the droop-filter equivalent
    inertia 1/(rp~ w_f).
    """
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    n_units = mmss.n_c + mmss.n_g
    if freqs.shape[1] != n_units:
        raise ValueError(f"need {n_units} frequency columns, got {freqs.shape[1]}")
    w = np.empty(n_units)
    for i in range(mmss.n_c):
        w[i] = 1.0 / (mmss.rp_sys(i) * mmss.case.vscs[i].omega_f)
    for j in range(mmss.n_g):
        w[mmss.n_c + j] = mmss.case.sgs[j].M_s
    return freqs @ w / w.sum()
