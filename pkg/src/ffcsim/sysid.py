"""Grey-box identification of the aggregate frequency model from disturbance
telemetry: prediction-error method with a parametrized Kalman predictor and
a damped Gauss-Newton search.

The fitted parameter vector is (omega_n, zeta, gain, T_z, K1, K2): the two
denominator coefficients, the transfer-function gain 1/(MT), the numerator
zero time constant, and the discrete innovation gain.  The physical set
(M, D, R_g, F_g, T) is underdetermined by one degree of freedom and is only
reported up to that ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .statespace import expm_pade

__all__ = [
    "IdDataset",
    "IdParameterVector",
    "FitReport",
    "predictor_step",
    "simulate_predictor",
    "pem_fit",
    "make_dataset",
    "save_dataset",
    "load_dataset",
]

BURN_IN = 5  # samples excluded from the objective (initial-state transient)


@dataclass(frozen=True)
class IdDataset:
    """Uniformly sampled (frequency deviation, power input) record."""

    df: np.ndarray    # frequency deviation, Hz
    dp: np.ndarray    # power input, system p.u.
    T_id: float       # sample period, s
    x0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        df = np.asarray(self.df, dtype=float).reshape(-1)
        dp = np.asarray(self.dp, dtype=float).reshape(-1)
        if df.shape != dp.shape:
            raise ValueError("df and dp must have the same length")
        if df.shape[0] < 50:
            raise ValueError(f"need at least 50 samples, got {df.shape[0]}")
        if self.T_id <= 0:
            raise ValueError("sample period must be > 0")
        if not (np.all(np.isfinite(df)) and np.all(np.isfinite(dp))):
            raise ValueError("dataset contains non-finite values")
        x0 = np.zeros(2) if self.x0 is None else np.asarray(self.x0, float)
        object.__setattr__(self, "df", df)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "x0", x0)

    def __len__(self) -> int:
        return self.df.shape[0]


@dataclass(frozen=True)
class IdParameterVector:
    """Identified model: continuous 2nd-order dynamics + discrete Kalman gain."""

    omega_n: float
    zeta: float
    gain: float       # 1/(MT): DC numerator coefficient (p.u. frequency frame)
    T_z: float        # numerator zero time constant
    K: np.ndarray     # innovation gain (2,)
    f_b: float = 50.0

    def theta(self) -> np.ndarray:
        return np.array([self.omega_n, self.zeta, self.gain, self.T_z,
                         self.K[0], self.K[1]])

    def matrices(self, T_id: float):
        return _matrices(self.theta(), T_id, self.f_b)


def _matrices(theta, T_id, f_b):
    """Discrete predictor matrices for a parameter vector."""
    wn, ze, g, Tz = theta[0], theta[1], theta[2], theta[3]
    A = np.array([[0.0, 1.0], [-wn * wn, -2.0 * ze * wn]])
    B = np.array([0.0, 1.0])
    C = f_b * np.array([g, g * Tz])   # output in Hz
    aug = np.zeros((3, 3))
    aug[:2, :2] = A * T_id
    aug[:2, 2] = B * T_id
    M = expm_pade(aug)
    return M[:2, :2], M[:2, 2], C


def predictor_step(A_d, B_d, C, K, x_hat, dp, df_meas):
    """One Kalman-predictor update; returns (x_next, df_pred)."""
    df_pred = float(C @ x_hat)
    x_next = A_d @ x_hat + B_d * dp + K * (df_meas - df_pred)
    return x_next, df_pred


def simulate_predictor(theta, dataset: IdDataset, f_b: float = 50.0):
    """Innovation-form pass over the dataset; returns predicted df (Hz)."""
    A_d, B_d, C = _matrices(theta, dataset.T_id, f_b)
    K = np.array([theta[4], theta[5]])
    x = dataset.x0.copy()
    n = len(dataset)
    pred = np.empty(n)
    for m in range(n):
        x, pred[m] = predictor_step(A_d, B_d, C, K, x, dataset.dp[m],
                                    dataset.df[m])
    return pred


def predictor_stable(theta, T_id, f_b=50.0) -> bool:
    A_d, B_d, C = _matrices(theta, T_id, f_b)
    K = np.array([theta[4], theta[5]])
    return bool(np.max(np.abs(np.linalg.eigvals(A_d - np.outer(K, C)))) < 1.0)


@dataclass
class FitReport:
    params: IdParameterVector
    rmse: float              # absolute, Hz
    rmse_pct: float          # percent of peak |df|
    iterations: int
    converged: bool
    objective_trace: list[float]
    note: str = ("physical set (M, D, R_g, F_g, T) underdetermined: "
                 "only (omega_n, zeta, gain, T_z) are identifiable")


def _residuals(theta, dataset, f_b):
    pred = simulate_predictor(theta, dataset, f_b)
    return (dataset.df - pred)[BURN_IN:]


def pem_fit(dataset: IdDataset, theta0, bounds=None, f_b: float = 50.0,
            max_iter: int = 60, tol: float = 1e-10) -> FitReport:
    """Damped Gauss-Newton minimization of the squared prediction residuals.

    theta0 = (omega_n, zeta, gain, T_z, K1, K2) initial guess.  Central
    finite-difference Jacobians; Levenberg damping adapts on accept/reject;
    predictor stability is enforced by shrinking K toward zero (K = 0 is
    always stable since the model itself is stable), and the returned
    predictor is hard-checked.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    if theta.shape != (6,):
        raise ValueError("theta0 must have 6 entries")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    if bounds is None:
        lo = np.array([1e-3, 1e-3, 1e-8, 1e-3, -2.0, -2.0])
        hi = np.array([50.0, 10.0, 1.0, 50.0, 2.0, 2.0])
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    theta = np.clip(theta, lo, hi)

    def project_stable(th):
        th = np.clip(th, lo, hi)
        for _ in range(60):
            if predictor_stable(th, dataset.T_id, f_b):
                return th
            th = th.copy()
            th[4:] *= 0.5
        th = th.copy()
        th[4:] = 0.0
        return th

    theta = project_stable(theta)
    res = _residuals(theta, dataset, f_b)
    obj = float(res @ res)
    trace = [obj]
    lam = 1e-6
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # central-difference Jacobian
        J = np.empty((res.shape[0], 6))
        for p in range(6):
            step = 1e-6 * max(abs(theta[p]), 1e-3)
            tp = theta.copy(); tp[p] += step
            tm = theta.copy(); tm[p] -= step
            J[:, p] = (_residuals(tp, dataset, f_b)
                       - _residuals(tm, dataset, f_b)) / (2 * step)
        g = J.T @ res
        H = J.T @ J
        accepted = False
        for _ in range(25):
            try:
                delta = -np.linalg.solve(H + lam * np.diag(np.diag(H) + 1e-12),
                                         g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            cand = project_stable(theta + delta)
            res_c = _residuals(cand, dataset, f_b)
            obj_c = float(res_c @ res_c)
            if obj_c < obj:
                theta, res, obj = cand, res_c, obj_c
                lam = max(lam / 3, 1e-12)
                accepted = True
                trace.append(obj)
                break
            lam *= 10
        if not accepted:
            break
        if len(trace) >= 2 and trace[-2] - trace[-1] < tol * max(trace[-2], 1e-30):
            converged = True
            break

    if not predictor_stable(theta, dataset.T_id, f_b):
        raise RuntimeError("identified predictor is unstable")
    rmse = float(np.sqrt(obj / res.shape[0]))
    peak = float(np.max(np.abs(dataset.df))) or 1.0
    params = IdParameterVector(omega_n=theta[0], zeta=theta[1], gain=theta[2],
                               T_z=theta[3], K=theta[4:].copy(), f_b=f_b)
    return FitReport(params=params, rmse=rmse, rmse_pct=100.0 * rmse / peak,
                     iterations=it, converged=converged,
                     objective_trace=trace)


def make_dataset(t, freq_hz, dp_pu, event_time: float, T_id: float = 0.02,
                 duration: float | None = None) -> IdDataset:
    """Resample a trajectory into an identification record.

    The pre-event mean is removed from the frequency channel; the input
    channel is aligned so the step lands within one sample of the event.
    """
    t = np.asarray(t, dtype=float)
    freq_hz = np.asarray(freq_hz, dtype=float)
    dp_pu = np.asarray(dp_pu, dtype=float)
    if not (t.shape == freq_hz.shape == dp_pu.shape):
        raise ValueError("t, freq and dp must share one grid")
    if event_time < t[0] or event_time > t[-1]:
        raise ValueError("event not found in trajectory")
    t_end = t[-1] if duration is None else min(t[-1], event_time + duration)
    samples = np.arange(event_time, t_end + 1e-12, T_id)
    pre = freq_hz[t < event_time]
    base = float(pre.mean()) if pre.size else float(freq_hz[0])
    df = np.interp(samples, t, freq_hz) - base
    dp = np.interp(samples, t, dp_pu)
    return IdDataset(df=df, dp=dp, T_id=T_id)


def save_dataset(dataset: IdDataset, path) -> None:
    with open(path, "w") as fh:
        fh.write("t,df_hz,dp_pu\n")
        for m in range(len(dataset)):
            fh.write(f"{m * dataset.T_id!r},{dataset.df[m]!r},{dataset.dp[m]!r}\n")


def load_dataset(path) -> IdDataset:
    raw = np.genfromtxt(path, delimiter=",", names=True)
    t = raw["t"]
    if t.shape[0] < 2:
        raise ValueError("dataset file too short")
    return IdDataset(df=raw["df_hz"], dp=raw["dp_pu"],
                     T_id=float(t[1] - t[0]))
