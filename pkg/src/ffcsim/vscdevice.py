"""Detailed grid-forming converter model: RLC filter + transformer electrical
circuit, droop outer loop, cascaded voltage/current PI loops and a DC link
with battery storage.  All quantities in per-unit on the converter base,
dq vectors as length-2 arrays, time in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

__all__ = [
    "VscElectricalParams",
    "VscControlGains",
    "DcSideParams",
    "VscDevice",
    "VscState",
    "FaultEvent",
    "rot90",
    "electrical_derivatives",
    "droop_outer",
    "rocof_state",
    "inner_loops",
    "dc_dynamics",
    "dc_current_reference",
    "dc_pi",
    "device_derivatives",
    "equilibrium",
    "integrate",
]

# dq cross-coupling operator: 90 degree rotation applied to dq vectors
_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def rot90(v: np.ndarray) -> np.ndarray:
    """Apply the dq rotation operator j = [[0,-1],[1,0]]."""
    return _J @ v


class FaultEvent(RuntimeError):
    """Raised when a simulated trajectory hits a fault condition."""


@dataclass(frozen=True)
class VscElectricalParams:
    """RLC filter + transformer equivalent, converter per-unit."""

    r_f: float = 0.01
    l_f: float = 0.08
    c_f: float = 0.074
    r_t: float = 0.01
    l_t: float = 0.2
    omega_b: float = 2.0 * np.pi * 50.0  # rad/s

    def __post_init__(self):
        for name in ("r_f", "l_f", "c_f", "r_t", "l_t", "omega_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"electrical parameter {name} must be > 0")


@dataclass(frozen=True)
class VscControlGains:
    """Inner-loop and DC-loop PI gains; feed-forward gains are 0/1 switches."""

    Kp_v: float = 0.52
    Ki_v: float = 1.16
    Kf_v: float = 1.0
    Kp_i: float = 0.73
    Ki_i: float = 1.19
    Kf_i: float = 1.0
    Kp_dc: float = 5.0
    Ki_dc: float = 50.0
    Kf_dc: float = 1.0

    def __post_init__(self):
        for name in ("Kp_v", "Kp_i", "Kp_dc"):
            if getattr(self, name) <= 0:
                raise ValueError(f"proportional gain {name} must be > 0")
        for name in ("Ki_v", "Ki_i", "Ki_dc"):
            if getattr(self, name) < 0:
                raise ValueError(f"integral gain {name} must be >= 0")
        for name in ("Kf_v", "Kf_i", "Kf_dc"):
            if getattr(self, name) not in (0.0, 1.0):
                raise ValueError(f"feed-forward gain {name} must be 0 or 1")


@dataclass(frozen=True)
class DcSideParams:
    """DC link: capacitance/conductance, voltage setpoint, battery capacity.

    e_b is the energy capacity in per-unit seconds (seconds at rated power).
    """

    c_dc: float = 0.5
    g_dc: float = 0.005
    v_dc_star: float = 2.4
    e_b: float = 36.0

    def __post_init__(self):
        for name in ("c_dc", "g_dc", "v_dc_star", "e_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"DC parameter {name} must be > 0")


@dataclass(frozen=True)
class VscDevice:
    """One grid-forming converter: parameters and setpoints (converter p.u.)."""

    elec: VscElectricalParams = field(default_factory=VscElectricalParams)
    gains: VscControlGains = field(default_factory=VscControlGains)
    dc: DcSideParams = field(default_factory=DcSideParams)
    rp: float = 0.02            # active power droop, p.u. freq / p.u. power
    rq: float = 0.001           # reactive power droop
    omega_f: float = 31.4       # power measurement filter cut-off, rad/s
    p_star: float = 0.5
    q_star: float = 0.0
    omega_star: float = 1.0
    v_star: float = 1.0

    def __post_init__(self):
        if self.rp <= 0:
            raise ValueError("active droop gain rp must be > 0")
        if self.omega_f <= 0:
            raise ValueError("filter cut-off omega_f must be > 0")

    def i_dc_star(self) -> float:
        return dc_current_reference(
            (self.v_star, self.p_star, self.q_star), self.dc, self.elec.r_f
        )


# state vector layout (flat, length 15)
IDX_IF = slice(0, 2)      # filter current i_f (dq)
IDX_VF = slice(2, 4)      # filter voltage v_f (dq)
IDX_IG = slice(4, 6)      # transformer current i_g (dq)
IDX_PT = 6                # filtered active power p~
IDX_QT = 7                # filtered reactive power q~
IDX_XI = slice(8, 10)     # voltage-loop integrator xi (dq)
IDX_GA = slice(10, 12)    # current-loop integrator gamma (dq)
IDX_VDC = 12              # DC voltage
IDX_CHIDC = 13            # DC-PI integrator (distinct from battery SoC)
IDX_SOC = 14              # battery state of charge
IDX_TH = 15               # converter frame angle vs. synchronous reference
N_STATES = 16

STATE_NAMES = (
    "i_f_d", "i_f_q", "v_f_d", "v_f_q", "i_g_d", "i_g_q",
    "p_tilde", "q_tilde", "xi_d", "xi_q", "gamma_d", "gamma_q",
    "v_dc", "chi_dc", "soc", "theta_c",
)


@dataclass
class VscState:
    """Structured view of the device state (see STATE_NAMES for the flat order)."""

    i_f: np.ndarray
    v_f: np.ndarray
    i_g: np.ndarray
    p_tilde: float
    q_tilde: float
    xi: np.ndarray
    gamma: np.ndarray
    v_dc: float
    chi_dc: float
    soc: float
    theta_c: float

    def to_vector(self) -> np.ndarray:
        x = np.empty(N_STATES)
        x[IDX_IF] = self.i_f
        x[IDX_VF] = self.v_f
        x[IDX_IG] = self.i_g
        x[IDX_PT] = self.p_tilde
        x[IDX_QT] = self.q_tilde
        x[IDX_XI] = self.xi
        x[IDX_GA] = self.gamma
        x[IDX_VDC] = self.v_dc
        x[IDX_CHIDC] = self.chi_dc
        x[IDX_SOC] = self.soc
        x[IDX_TH] = self.theta_c
        return x

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "VscState":
        return cls(
            i_f=np.array(x[IDX_IF]),
            v_f=np.array(x[IDX_VF]),
            i_g=np.array(x[IDX_IG]),
            p_tilde=float(x[IDX_PT]),
            q_tilde=float(x[IDX_QT]),
            xi=np.array(x[IDX_XI]),
            gamma=np.array(x[IDX_GA]),
            v_dc=float(x[IDX_VDC]),
            chi_dc=float(x[IDX_CHIDC]),
            soc=float(x[IDX_SOC]),
            theta_c=float(x[IDX_TH]),
        )


def power_measurements(v_f: np.ndarray, i_g: np.ndarray) -> tuple[float, float]:
    """Instantaneous p_c = v_f^T i_g and q_c = v_f^T j^T i_g."""
    p_c = float(v_f @ i_g)
    q_c = float(v_f @ (_J.T @ i_g))
    return p_c, q_c


def electrical_derivatives(elec, i_f, v_f, i_g, v_sw, v_t, omega_r):
    """RLC filter and transformer dynamics (converter p.u., dq frame)."""
    wb = elec.omega_b
    di_f = (wb / elec.l_f) * (v_sw - v_f) - (elec.r_f / elec.l_f) * wb * i_f \
        - wb * omega_r * rot90(i_f)
    dv_f = (wb / elec.c_f) * (i_f - i_g) - wb * omega_r * rot90(v_f)
    di_g = (wb / elec.l_t) * (v_f - v_t) - (elec.r_t / elec.l_t) * wb * i_g \
        - wb * omega_r * rot90(i_g)
    return di_f, dv_f, di_g


def droop_outer(dev: VscDevice, p_tilde, q_tilde, p_c, q_c, dp_star=0.0):
    """Droop law: frequency/voltage references and measurement-filter derivatives."""
    omega_c = dev.omega_star + dev.rp * (dev.p_star + dp_star - p_tilde)
    v_c_mag = dev.v_star + dev.rq * (dev.q_star - q_tilde)
    dp_tilde = dev.omega_f * (p_c - p_tilde)
    dq_tilde = dev.omega_f * (q_c - q_tilde)
    return omega_c, v_c_mag, dp_tilde, dq_tilde


def rocof_state(dev: VscDevice, p_tilde, p_c) -> float:
    """Internal RoCoF signal of the droop controller (p.u./s)."""
    return dev.rp * dev.omega_f * (p_tilde - p_c)


def inner_loops(dev: VscDevice, i_f, v_f, i_g, xi, gamma, v_f_ref, omega_c):
    """Cascaded voltage/current PI loops; returns v_sw reference and
    integrator derivatives."""
    g = dev.gains
    i_f_star = (
        g.Kp_v * (v_f_ref - v_f)
        + g.Ki_v * xi
        + g.Kf_v * i_g
        + omega_c * dev.elec.c_f * rot90(v_f)
    )
    v_sw_star = (
        g.Kp_i * (i_f_star - i_f)
        + g.Ki_i * gamma
        + g.Kf_i * v_f
        + omega_c * dev.elec.l_f * rot90(i_f)
    )
    dxi = v_f_ref - v_f
    dgamma = i_f_star - i_f
    return v_sw_star, dxi, dgamma


def dc_dynamics(dc: DcSideParams, omega_b, v_dc, i_dc, p_sw, p_dc):
    """DC-link voltage and battery SoC derivatives; i_sw = p_sw / v_dc."""
    i_sw = p_sw / v_dc
    dv_dc = (omega_b / dc.c_dc) * (-dc.g_dc * v_dc - i_sw + i_dc)
    dsoc = (p_dc - p_sw) / dc.e_b
    return dv_dc, dsoc


def dc_current_reference(setpoints, dc: DcSideParams, r_f: float) -> float:
    """Nominal DC current covering the AC setpoint plus DC and AC losses."""
    v_c_star, p_star, q_star = setpoints
    if v_c_star <= 0 or dc.v_dc_star <= 0:
        raise ValueError("voltage setpoints must be positive")
    loss_ac = r_f * (p_star**2 + q_star**2) / v_c_star**2
    return (p_star + loss_ac) / dc.v_dc_star + dc.g_dc * dc.v_dc_star


def dc_pi(gains: VscControlGains, dc: DcSideParams, v_dc, chi_dc, i_dc_star):
    """DC-voltage PI tracking: source current and integrator derivative."""
    err = dc.v_dc_star - v_dc
    i_dc = gains.Kp_dc * err + gains.Ki_dc * chi_dc + gains.Kf_dc * i_dc_star
    return i_dc, err


def device_derivatives(dev: VscDevice, x: np.ndarray, v_t: np.ndarray,
                       dp_star: float = 0.0, omega_ref: float = 1.0):
    """Full device state derivative.

    v_t is the terminal voltage in the device's own dq frame; omega_ref is the
    speed (p.u.) of the synchronous reference theta_c is measured against.
    Returns (xdot, outputs dict).
    """
    i_f = x[IDX_IF]
    v_f = x[IDX_VF]
    i_g = x[IDX_IG]
    p_tilde = x[IDX_PT]
    q_tilde = x[IDX_QT]

    p_c, q_c = power_measurements(v_f, i_g)
    omega_c, v_c_mag, dp_t, dq_t = droop_outer(dev, p_tilde, q_tilde, p_c, q_c, dp_star)
    v_f_ref = np.array([v_c_mag, 0.0])
    v_sw, dxi, dgamma = inner_loops(dev, i_f, v_f, i_g, x[IDX_XI], x[IDX_GA],
                                    v_f_ref, omega_c)

    # ideal modulation: v_sw := v_sw_star, dq frame rotates at the device's own omega_c
    di_f, dv_f, di_g = electrical_derivatives(dev.elec, i_f, v_f, i_g, v_sw, v_t, omega_c)

    p_sw = float(v_sw @ i_f)
    i_dc, dchi_dc = dc_pi(dev.gains, dev.dc, x[IDX_VDC], x[IDX_CHIDC], dev.i_dc_star())
    p_dc = x[IDX_VDC] * i_dc
    dv_dc, dsoc = dc_dynamics(dev.dc, dev.elec.omega_b, x[IDX_VDC], i_dc, p_sw, p_dc)

    xdot = np.empty(N_STATES)
    xdot[IDX_IF] = di_f
    xdot[IDX_VF] = dv_f
    xdot[IDX_IG] = di_g
    xdot[IDX_PT] = dp_t
    xdot[IDX_QT] = dq_t
    xdot[IDX_XI] = dxi
    xdot[IDX_GA] = dgamma
    xdot[IDX_VDC] = dv_dc
    xdot[IDX_CHIDC] = dchi_dc
    xdot[IDX_SOC] = dsoc
    xdot[IDX_TH] = dev.elec.omega_b * (omega_c - omega_ref)

    outputs = {
        "p_c": p_c, "q_c": q_c, "omega_c": omega_c, "p_sw": p_sw,
        "i_dc": i_dc, "p_dc": p_dc,
        "rocof": rocof_state(dev, p_tilde, p_c),
    }
    return xdot, outputs


def _equilibrium_guess(dev: VscDevice, v_t_mag: float, dp_star: float):
    """Analytic steady-state construction used to warm-start the solver.

    At steady state the droop pins p~ = p* + dp*; the phasor chain
    v_f = v_t + (r_t + l_t j) i_g etc. then fixes everything else.
    """
    e = dev.elec
    g = dev.gains
    p_t = dev.p_star + dp_star
    i_g = np.array([p_t, -dev.q_star])  # v_f ~ [1, 0] first pass
    v_f = np.array([1.0, 0.0])
    for _ in range(30):
        vmag = max(v_f[0], 0.1)
        i_g = np.array([p_t / vmag, dev.q_star / vmag])
        q_c = float(v_f @ (_J.T @ i_g))
        v_mag = dev.v_star + dev.rq * (dev.q_star - q_c)
        v_f = np.array([v_mag, 0.0])
    i_f = i_g + e.c_f * rot90(v_f)
    v_sw = v_f + e.r_f * i_f + e.l_f * rot90(i_f)
    p_sw = float(v_sw @ i_f)
    v_t_dev = v_f - e.r_t * i_g - e.l_t * rot90(i_g)
    delta = -np.arctan2(v_t_dev[1], v_t_dev[0])
    xi = np.zeros(2)
    gamma = e.r_f * i_f / g.Ki_i if g.Ki_i > 0 else np.zeros(2)
    v_dc = dev.dc.v_dc_star
    i_dc_needed = dev.dc.g_dc * v_dc + p_sw / v_dc
    chi_dc = (i_dc_needed - g.Kf_dc * dev.i_dc_star()) / g.Ki_dc if g.Ki_dc > 0 else 0.0
    z = np.zeros(15)
    z[IDX_IF] = i_f
    z[IDX_VF] = v_f
    z[IDX_IG] = i_g
    z[IDX_PT] = p_t
    z[IDX_QT] = dev.q_star
    z[IDX_XI] = xi
    z[IDX_GA] = gamma
    z[IDX_VDC] = v_dc
    z[IDX_CHIDC] = chi_dc
    z[14] = delta
    return z


def equilibrium(dev: VscDevice, v_t_mag: float = 1.0, dp_star: float = 0.0,
                soc0: float = 0.5) -> np.ndarray:
    """Steady state on an infinite bus of magnitude v_t_mag at speed 1 p.u.

    Solves for all electrical/controller states plus the frame angle so that
    every derivative except the SoC drift vanishes and omega_c = 1.
    """
    e = dev.elec
    # row scaling evens out the stiff electrical equations
    scale = np.empty(15)
    scale[IDX_IF] = e.l_f / e.omega_b
    scale[IDX_VF] = e.c_f / e.omega_b
    scale[IDX_IG] = e.l_t / e.omega_b
    scale[IDX_PT] = 1.0 / dev.omega_f
    scale[IDX_QT] = 1.0 / dev.omega_f
    scale[IDX_XI] = 1.0
    scale[IDX_GA] = 1.0
    scale[IDX_VDC] = dev.dc.c_dc / e.omega_b
    scale[IDX_CHIDC] = 1.0
    scale[14] = 1.0

    def residual(z):
        x = np.zeros(N_STATES)
        x[:IDX_SOC] = z[:IDX_SOC]
        x[IDX_SOC] = soc0
        delta = z[14]  # frame angle ahead of the grid phasor
        v_t = v_t_mag * np.array([np.cos(-delta), np.sin(-delta)])
        xdot, out = device_derivatives(dev, x, v_t, dp_star, omega_ref=1.0)
        res = np.empty(15)
        res[:14] = xdot[:14]
        res[14] = out["omega_c"] - 1.0
        return res * scale

    z0 = _equilibrium_guess(dev, v_t_mag, dp_star)
    sol = root(residual, z0, method="hybr", tol=1e-13)
    if np.max(np.abs(residual(sol.x))) > 1e-9:
        raise RuntimeError(f"equilibrium solve failed: {sol.message}")
    x = np.zeros(N_STATES)
    x[:IDX_SOC] = sol.x[:IDX_SOC]
    x[IDX_SOC] = soc0
    x[IDX_TH] = sol.x[14]
    if x[IDX_VDC] <= 0:
        raise RuntimeError("equilibrium has non-positive DC voltage")
    return x


def _rk4_step(f, x, t, dt):
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(dev: VscDevice, x0: np.ndarray, t_span: float, dt: float = 1e-4,
              v_t_fn=None, dp_star_fn=None, record_every: int = 1):
    """Fixed-step RK4 trajectory of a single device.

    v_t_fn(t, x) must return the terminal dq voltage in the device frame;
    defaults to an infinite bus of 1 p.u. at the synchronous reference angle.
    dp_star_fn(t) returns the supervisory setpoint change (default 0).
    """
    if dt > 1e-3:
        raise ValueError("detailed model needs dt <= 1 ms (stiff inner loops)")

    if v_t_fn is None:
        def v_t_fn(t, x):  # infinite bus at global angle 0
            th = x[IDX_TH]
            return np.array([np.cos(-th), np.sin(-th)])
    if dp_star_fn is None:
        def dp_star_fn(t):
            return 0.0

    def f(t, x):
        xdot, _ = device_derivatives(dev, x, v_t_fn(t, x), dp_star_fn(t))
        return xdot

    n_steps = int(round(t_span / dt))
    n_rec = n_steps // record_every + 1
    times = np.empty(n_rec)
    states = np.empty((n_rec, N_STATES))
    outs = {k: np.empty(n_rec) for k in
            ("p_c", "q_c", "omega_c", "p_sw", "i_dc", "p_dc", "rocof")}

    x = np.array(x0, dtype=float)
    t = 0.0
    rec = 0
    for step in range(n_steps + 1):
        if step % record_every == 0 and rec < n_rec:
            _, out = device_derivatives(dev, x, v_t_fn(t, x), dp_star_fn(t))
            times[rec] = t
            states[rec] = x
            for k in outs:
                outs[k][rec] = out[k]
            rec += 1
        if step == n_steps:
            break
        x = _rk4_step(f, x, t, dt)
        t += dt
        if not np.all(np.isfinite(x)):
            bad = STATE_NAMES[int(np.argmax(~np.isfinite(x)))]
            raise FaultEvent(f"non-finite state '{bad}' at t={t:.6f}s")
        if x[IDX_VDC] <= 0.0:
            raise FaultEvent(f"DC voltage collapsed at t={t:.6f}s")

    return {"t": times, "x": states, **outs}
