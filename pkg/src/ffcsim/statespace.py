"""Continuous/discrete LTI state-space containers and ZOH discretization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LinearSS", "expm_pade", "discretize_zoh"]

# Pade-13 coefficients for the scaling-and-squaring matrix exponential
# (Higham 2005).  Fixed order keeps the result bit-identical across platforms.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm_pade(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by order-13 Pade approximation with scaling/squaring."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    norm = np.linalg.norm(A, 1)
    s = 0
    if norm > _THETA13:
        s = int(np.ceil(np.log2(norm / _THETA13)))
    As = A / (2.0**s)

    b = _PADE13
    ident = np.eye(n)
    A2 = As @ As
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = As @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6
        + b[5] * A4
        + b[3] * A2
        + b[1] * ident
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6
        + b[4] * A4
        + b[2] * A2
        + b[0] * ident
    )
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


@dataclass(frozen=True)
class LinearSS:
    """State-space quadruple, optionally carrying a ZOH-discretized pair.

    Continuous model: dx/dt = A x + B u, y = C x + D u.  When ``T_s`` is set,
    ``A_d``/``B_d`` hold the zero-order-hold equivalent at that sample period
    (C, D are unchanged by ZOH).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = field(default=None)  # type: ignore[assignment]
    A_d: np.ndarray | None = None
    B_d: np.ndarray | None = None
    T_s: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = self.D
        if D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
        D = np.atleast_2d(np.asarray(D, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D shape {D.shape} inconsistent with C/B")
        if (self.T_s is None) != (self.A_d is None):
            raise ValueError("discrete pair must come with its sample period")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def has_discrete(self) -> bool:
        return self.T_s is not None


def discretize_zoh(ss: LinearSS, T_s: float) -> LinearSS:
    """ZOH equivalent via the augmented-matrix exponential.

    exp([[A, B], [0, 0]] * T_s) = [[A_d, B_d], [0, I]], exact for
    piecewise-constant inputs.
    """
    if T_s <= 0:
        raise ValueError(f"sample period must be positive, got {T_s}")
    n, m = ss.n_states, ss.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = ss.A
    aug[:n, n:] = ss.B
    M = expm_pade(aug * T_s)
    return LinearSS(
        A=ss.A,
        B=ss.B,
        C=ss.C,
        D=ss.D,
        A_d=M[:n, :n],
        B_d=M[:n, n:],
        T_s=float(T_s),
    )
