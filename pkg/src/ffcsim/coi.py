"""Center-of-inertia frequency prediction model, the RoCoF-based baseline
predictor and local disturbance-magnitude estimation.

The second-order aggregate maps a power change (system p.u.) to the CoI
frequency deviation.  The state-space output is the per-unit deviation;
helpers convert to Hz where needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statespace import LinearSS, discretize_zoh

__all__ = [
    "CoiParams",
    "coi_from_fleet",
    "coi_state_space",
    "estimate_disturbance",
    "predict_frequency",
    "rocof_baseline_predict",
]


@dataclass(frozen=True)
class CoiParams:
    """Aggregate inertia/damping/droop parameters of the CoI model.

    M: aggregate inertia (p.u.*s); D: damping (instantaneous power response
    per p.u. frequency); R_g: governor-lagged inverse droop; F_g: turbine
    high-pressure fraction term; T: governor time constant (s).
    """

    M: float
    D: float
    R_g: float
    F_g: float
    T: float
    f_b: float = 50.0
    f_0: float = 50.0

    def __post_init__(self):
        if self.M <= 0 or self.T <= 0:
            raise ValueError("CoI parameters need M > 0 and T > 0")
        for name in ("D", "R_g", "F_g"):
            if getattr(self, name) < 0:
                raise ValueError(f"CoI parameter {name} must be >= 0")
        if self.D + self.R_g <= 0:
            raise ValueError("need D + R_g > 0 for a stable aggregate")

    @property
    def omega_n(self) -> float:
        return np.sqrt((self.D + self.R_g) / (self.M * self.T))

    @property
    def zeta(self) -> float:
        return (self.M + self.T * (self.D + self.F_g)) / (
            2.0 * np.sqrt(self.M * self.T * (self.D + self.R_g))
        )

    def dc_gain(self) -> float:
        """Steady-state p.u. frequency deviation per p.u. power step."""
        return 1.0 / (self.D + self.R_g)


def coi_from_fleet(sgs, vscs=(), s_base: float = 100.0,
                   f_b: float = 50.0, f_0: float = 50.0) -> CoiParams:
    """Aggregate CoI parameters from the online fleet (system per-unit).

    SG records contribute inertia, damping and governor droop directly (their
    fields are already on the system base).  Converter droop acts through the
    fast power-measurement filter, equivalent to inertia 1/(R~ w_f) plus
    damping 1/R~ with R~ the droop rebased to system p.u.; both are folded in
    so the aggregate sees the converters' frequency support.  The governor
    time constant is the gain-weighted fleet average.
    """
    sgs = list(sgs)
    if not sgs:
        raise ValueError("CoI aggregation needs at least one online SG")
    M = sum(g.M_s for g in sgs)
    D = sum(g.D_s for g in sgs)
    R_g = sum(g.K_g for g in sgs)
    T = sum(g.K_g * g.T_g for g in sgs) / R_g
    for u in vscs:
        # rp is per-unit on the unit rating: rebase the droop slope
        r_sys = u.rp * s_base / u.rating_mw
        M += 1.0 / (r_sys * u.omega_f)
        D += 1.0 / r_sys
    return CoiParams(M=M, D=D, R_g=R_g, F_g=0.0, T=T, f_b=f_b, f_0=f_0)


def coi_state_space(params: CoiParams) -> LinearSS:
    """Controllable-canonical realization of the aggregate transfer function.

    Output is the per-unit frequency deviation: C = [1/(MT), 1/M]; DC gain
    equals 1/(D + R_g).
    """
    wn = params.omega_n
    ze = params.zeta
    A = np.array([[0.0, 1.0], [-wn**2, -2.0 * ze * wn]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0 / (params.M * params.T), 1.0 / params.M]])
    return LinearSS(A=A, B=B, C=C)


def estimate_disturbance(rocof_max: float, M: float) -> float:
    """Disturbance magnitude from the post-event RoCoF: dP = -M * wdot_max.

    rocof_max is the 10 ms-averaged internal RoCoF right after the trigger,
    in p.u./s; the result is in system p.u. (negative rocof -> power deficit
    reported positive).
    """
    if M <= 0:
        raise ValueError("aggregate inertia must be > 0")
    return -M * rocof_max


def predict_frequency(ss: LinearSS, x0, dP: float, u_seq, N: int,
                      f_0: float = 50.0, f_b: float = 50.0):
    """Frequency and average-RoCoF predictions over N future steps.

    x(k+1) = A_d x(k) + B_d (u(k) + dP); f(k) = f_b * C x(k) + f_0;
    fdot(k) = (f(k) - f(k-1)) / T_s.  Returns (f, fdot) arrays of length N
    for steps 1..N.
    """
    if not ss.has_discrete():
        raise ValueError("predict_frequency needs a ZOH-discretized model")
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1)
    if u_seq.shape[0] != N:
        raise ValueError(f"u_seq must have N={N} entries, got {u_seq.shape[0]}")
    x = np.asarray(x0, dtype=float).reshape(-1)
    C = ss.C[0]
    f_prev = f_b * float(C @ x) + f_0
    f = np.empty(N)
    fdot = np.empty(N)
    for k in range(N):
        x = ss.A_d @ x + (ss.B_d[:, 0] * (u_seq[k] + dP))
        f[k] = f_b * float(C @ x) + f_0
        fdot[k] = (f[k] - f_prev) / ss.T_s
        f_prev = f[k]
    return f, fdot


def rocof_baseline_predict(rocof_now: float, H: float, dp_seq, T_s: float,
                           N: int, cumulative: bool = False) -> np.ndarray:
    """RoCoF-extrapolation frequency deviations for steps 1..N.

    Literal form: df(k+j) = r_f(k) T_s + dp(k+j) / (2H) * T_s, a constant
    offset per step.  The cumulative variant sums the per-step terms,
    giving the linear-decay reading.  Inputs and output share one frame
    (use p.u. and p.u./s, or Hz and Hz/s with dp pre-scaled).
    """
    if H <= 0:
        raise ValueError("inertia constant H must be > 0")
    dp_seq = np.asarray(dp_seq, dtype=float).reshape(-1)
    if dp_seq.shape[0] != N:
        raise ValueError(f"dp_seq must have N={N} entries, got {dp_seq.shape[0]}")
    steps = rocof_now * T_s + dp_seq / (2.0 * H) * T_s
    if cumulative:
        return np.cumsum(steps)
    return steps
