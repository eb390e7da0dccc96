"""Dense linear-programming core.

solve_lp: two-phase primal simplex with Bland's rule (deterministic,
anti-cycling), explicit basis inverse, exact vertex solutions with duals and
active sets.  solve_mplp: multi-parametric LP over a right-hand-side
parameter embedding b = b0 + S l; since the cost vector is fixed, an optimal
basis stays optimal on the polyhedron where its basic solution remains
feasible, so critical regions are explored by crossing facets and re-solving.

Problem sizes here are tens to a few hundred variables; everything is dense
numpy for simplicity and determinism.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

__all__ = [
    "LpStandard",
    "LpSolution",
    "solve_lp",
    "PwaRegion",
    "PwaLaw",
    "solve_mplp",
    "eval_explicit",
    "save_law",
    "load_law",
]

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
FACET_TOL = 1e-8


@dataclass(frozen=True)
class LpStandard:
    """min c.z  s.t.  A_ub z <= b_ub, A_eq z = b_eq, lb <= z <= ub.

    For multi-parametric use, b_ub = b_ub0 + S_ub @ l (and likewise b_eq)
    for a parameter vector l; pass the offset vectors in b_ub/b_eq and the
    sensitivity matrices in S_ub/S_eq.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    S_ub: np.ndarray | None = None
    S_eq: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.shape[0]
        object.__setattr__(self, "c", c)

        def mat(name, val, cols):
            if val is None:
                return None
            arr = np.atleast_2d(np.asarray(val, dtype=float))
            if arr.shape[1] != cols:
                raise ValueError(f"{name} has {arr.shape[1]} columns, expected {cols}")
            return arr

        def vec(name, val, rows):
            if val is None:
                return None
            arr = np.asarray(val, dtype=float).reshape(-1)
            if arr.shape[0] != rows:
                raise ValueError(f"{name} has {arr.shape[0]} entries, expected {rows}")
            return arr

        A_ub = mat("A_ub", self.A_ub, n)
        A_eq = mat("A_eq", self.A_eq, n)
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_ub", vec("b_ub", self.b_ub, A_ub.shape[0]) if A_ub is not None else None)
        object.__setattr__(self, "b_eq", vec("b_eq", self.b_eq, A_eq.shape[0]) if A_eq is not None else None)
        lb = vec("lb", self.lb, n) if self.lb is not None else np.zeros(n)
        ub = vec("ub", self.ub, n) if self.ub is not None else np.full(n, np.inf)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        for nm in ("c",):
            if not np.all(np.isfinite(c)):
                raise ValueError("cost vector must be finite")
        if self.S_ub is not None:
            S = np.atleast_2d(np.asarray(self.S_ub, dtype=float))
            if A_ub is None or S.shape[0] != A_ub.shape[0]:
                raise ValueError("S_ub rows must match A_ub rows")
            object.__setattr__(self, "S_ub", S)
        if self.S_eq is not None:
            S = np.atleast_2d(np.asarray(self.S_eq, dtype=float))
            if A_eq is None or S.shape[0] != A_eq.shape[0]:
                raise ValueError("S_eq rows must match A_eq rows")
            object.__setattr__(self, "S_eq", S)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_params(self) -> int:
        for S in (self.S_ub, self.S_eq):
            if S is not None:
                return S.shape[1]
        return 0


@dataclass(frozen=True)
class LpSolution:
    status: str                     # optimal | infeasible | unbounded
    z: np.ndarray | None
    objective: float
    dual_objective: float
    duals_ub: np.ndarray | None
    duals_eq: np.ndarray | None
    active_ub: tuple[int, ...]      # binding inequality rows
    basis: tuple[int, ...]          # basis columns of the computational form
    iterations: int


# ---------------------------------------------------------------------------
# conversion to computational standard form  min c.w  s.t.  A w = b(l), w >= 0


class _Computational:
    """Standard-form image of an LpStandard with the affine recovery map
    z = shift + P w and the parametric right-hand side b(l) = b0 + S l."""

    def __init__(self, lp: LpStandard):
        n = lp.n_vars
        n_l = lp.n_params
        cols_c = []
        col_of_pos = np.full(n, -1, dtype=int)
        col_of_neg = np.full(n, -1, dtype=int)
        shift = np.zeros(n)
        for j in range(n):
            if np.isfinite(lp.lb[j]):
                shift[j] = lp.lb[j]
                col_of_pos[j] = len(cols_c)
                cols_c.append(lp.c[j])
            else:
                col_of_pos[j] = len(cols_c)
                cols_c.append(lp.c[j])
                col_of_neg[j] = len(cols_c)
                cols_c.append(-lp.c[j])
        n_struct = len(cols_c)

        rows_A = []
        rows_b0 = []
        rows_S = []
        ub_row_index = []   # original inequality row of each row, or -1

        def struct_row(a_orig):
            row = np.zeros(n_struct)
            for j in range(n):
                if a_orig[j] == 0.0:
                    continue
                row[col_of_pos[j]] += a_orig[j]
                if col_of_neg[j] >= 0:
                    row[col_of_neg[j]] -= a_orig[j]
            return row

        m_ub = 0 if lp.A_ub is None else lp.A_ub.shape[0]
        for i in range(m_ub):
            a = lp.A_ub[i]
            rows_A.append(struct_row(a))
            rows_b0.append(lp.b_ub[i] - a @ shift)
            rows_S.append(lp.S_ub[i] if lp.S_ub is not None else np.zeros(n_l))
            ub_row_index.append(i)
        # finite upper bounds become inequality rows
        for j in range(n):
            if np.isfinite(lp.ub[j]):
                a = np.zeros(n)
                a[j] = 1.0
                rows_A.append(struct_row(a))
                rows_b0.append(lp.ub[j] - shift[j])
                rows_S.append(np.zeros(n_l))
                ub_row_index.append(-1)
        n_ineq = len(rows_A)
        m_eq = 0 if lp.A_eq is None else lp.A_eq.shape[0]
        for i in range(m_eq):
            a = lp.A_eq[i]
            rows_A.append(struct_row(a))
            rows_b0.append(lp.b_eq[i] - a @ shift)
            rows_S.append(lp.S_eq[i] if lp.S_eq is not None else np.zeros(n_l))
            ub_row_index.append(-1)

        m = len(rows_A)
        A = np.zeros((m, n_struct + n_ineq))
        if m:
            A[:, :n_struct] = np.vstack(rows_A)
        for i in range(n_ineq):
            A[i, n_struct + i] = 1.0
        c_full = np.concatenate([np.array(cols_c), np.zeros(n_ineq)])

        self.lp = lp
        self.A = A
        self.b0 = np.array(rows_b0)
        self.S = np.vstack(rows_S) if (rows_S and n_l) else np.zeros((m, n_l))
        self.c = c_full
        self.n_struct = n_struct
        self.n_ineq = n_ineq
        self.m_ub = m_ub
        self.m_eq = m_eq
        self.shift = shift
        self.col_of_pos = col_of_pos
        self.col_of_neg = col_of_neg
        self.ub_row_index = ub_row_index
        self.obj_shift = float(lp.c @ shift)

    def b(self, l=None) -> np.ndarray:
        if l is None or self.S.shape[1] == 0:
            return self.b0.copy()
        return self.b0 + self.S @ np.asarray(l, dtype=float).reshape(-1)

    def recover(self, w: np.ndarray) -> np.ndarray:
        z = self.shift.copy()
        z += w[self.col_of_pos]
        has_neg = self.col_of_neg >= 0
        z[has_neg] -= w[self.col_of_neg[has_neg]]
        return z

    def recovery_map(self):
        """Matrix P with z = shift + P w (structural columns only)."""
        n = self.lp.n_vars
        P = np.zeros((n, self.A.shape[1]))
        for j in range(n):
            P[j, self.col_of_pos[j]] = 1.0
            if self.col_of_neg[j] >= 0:
                P[j, self.col_of_neg[j]] = -1.0
        return P


# ---------------------------------------------------------------------------
# two-phase primal simplex, Bland's rule


def _simplex(A, b, c, slack_cols=None, max_iter=100_000):
    """min c.w, A w = b, w >= 0.  Returns (status, w, basis, iterations).

    Rows are sign-normalized internally so phase 1 can start from a feasible
    identity-like basis; that normalization does not affect which bases are
    feasible/optimal.  slack_cols[i] names the unit slack column of row i
    (or -1) so unflipped rows can start from their slack instead of an
    artificial variable.
    """
    m, n = A.shape
    flip = b < 0
    A = np.where(flip[:, None], -A, A)
    b = np.where(flip, -b, b)

    iters = 0

    def run(phase_A, phase_c, basis, allow_unbounded):
        nonlocal iters
        mA = phase_A.shape[0]
        Binv = np.linalg.inv(phase_A[:, basis])
        xb = Binv @ b
        refactor = 0
        while True:
            if iters >= max_iter:
                return "iteration_limit", basis, Binv, xb
            y = Binv.T @ phase_c[basis]
            red = phase_c - phase_A.T @ y
            cand = np.flatnonzero(red < -OPT_TOL)
            if cand.size == 0:
                return "optimal", basis, Binv, xb
            e = int(cand[0])  # Bland: smallest index enters
            d = Binv @ phase_A[:, e]
            pos = d > FEAS_TOL
            if not np.any(pos):
                if allow_unbounded:
                    return "unbounded", basis, Binv, xb
                # phase-1 objective is bounded below; numerical guard
                return "optimal", basis, Binv, xb
            ratios = np.full(mA, np.inf)
            ratios[pos] = xb[pos] / d[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + FEAS_TOL * (1.0 + abs(rmin)))
            # Bland: leaving row whose basic variable has the smallest index
            leave = int(ties[np.argmin(np.asarray(basis)[ties])])
            basis[leave] = e
            iters += 1
            refactor += 1
            if refactor >= 100:
                Binv = np.linalg.inv(phase_A[:, basis])
                refactor = 0
            else:
                # product-form update: E differs from I in one column, so
                # E @ Binv is a rank-style O(m^2) row correction
                piv = d[leave]
                factor = d / piv
                factor[leave] = 1.0 - 1.0 / piv
                Binv = Binv - np.outer(factor, Binv[leave])
            xb = Binv @ b
            xb = np.where((xb < 0) & (xb > -1e-9), 0.0, xb)

    # phase 1: unflipped rows with a slack start from it, the rest from
    # artificials
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = []
    any_artificial = False
    for i in range(m):
        sc = -1 if slack_cols is None else slack_cols[i]
        if sc >= 0 and not flip[i]:
            basis.append(sc)
        else:
            basis.append(n + i)
            any_artificial = True
    if any_artificial or slack_cols is None:
        status, basis, Binv, xb = run(A1, c1, basis, allow_unbounded=False)
        if status == "iteration_limit":
            return status, None, tuple(basis), iters
        phase1_obj = float(c1[basis] @ xb)
        if phase1_obj > 1e-7:
            return "infeasible", None, tuple(basis), iters
    else:
        Binv = np.linalg.inv(A1[:, basis])

    # drive remaining artificials out of the basis
    for i in range(m):
        if basis[i] >= n:
            row = Binv[i] @ A
            pivots = np.flatnonzero(np.abs(row) > 1e-9)
            if pivots.size:
                e = int(pivots[0])
                piv = row[e]
                E = np.eye(m)
                E[:, i] = -(Binv @ A[:, e]) / piv
                E[i, i] = 1.0 / piv
                Binv = E @ Binv
                basis[i] = e
            # else: redundant row, keep the artificial pinned at zero

    # phase 2 on the original columns (artificials priced out with +inf cost)
    A2 = A1
    c2 = np.concatenate([c, np.full(m, 1e18)])
    status, basis, Binv, xb = run(A2, c2, basis, allow_unbounded=True)
    if status == "iteration_limit":
        return status, None, tuple(basis), iters
    if status == "unbounded":
        return "unbounded", None, tuple(basis), iters
    w = np.zeros(n)
    for i, bi in enumerate(basis):
        if bi < n:
            w[bi] = max(xb[i], 0.0)
    return "optimal", w, tuple(basis), iters


def solve_lp(lp: LpStandard, l=None, max_iter=100_000) -> LpSolution:
    """Solve an LpStandard instance (optionally at parameter vector l).

    Deterministic Bland pivoting; infeasible/unbounded are reported as
    statuses.  Duals are taken from the final basis; for an optimal vertex
    the primal and dual objectives coincide.
    """
    comp = _Computational(lp)
    b = comp.b(l)
    slack_cols = [comp.n_struct + i for i in range(comp.n_ineq)]
    slack_cols += [-1] * comp.m_eq
    status, w, basis, iters = _simplex(comp.A, b, comp.c,
                                       slack_cols=slack_cols,
                                       max_iter=max_iter)
    if status != "optimal":
        return LpSolution(status=status, z=None, objective=np.nan,
                          dual_objective=np.nan, duals_ub=None, duals_eq=None,
                          active_ub=(), basis=basis, iterations=iters)
    z = comp.recover(w)
    obj = float(lp.c @ z)

    # duals of the equality system A w = b: y solves A_B^T y = c_B
    # (artificial columns, if any survived on redundant rows, price at 0)
    m = comp.A.shape[0]
    A_full = np.hstack([comp.A, np.eye(m)])
    c_full = np.concatenate([comp.c, np.zeros(m)])
    Binv = np.linalg.inv(A_full[:, list(basis)])
    y = Binv.T @ c_full[list(basis)]
    dual_obj = float(b @ y) + comp.obj_shift
    duals_ub = None
    if comp.m_ub:
        duals_ub = np.zeros(comp.m_ub)
        for row in range(comp.n_ineq):
            orig = comp.ub_row_index[row]
            if orig >= 0:
                duals_ub[orig] = y[row]
    duals_eq = y[comp.n_ineq:comp.n_ineq + comp.m_eq].copy() if comp.m_eq else None

    active = []
    if lp.A_ub is not None:
        resid = lp.b_ub + (lp.S_ub @ np.asarray(l, dtype=float) if (lp.S_ub is not None and l is not None) else 0.0) - lp.A_ub @ z
        active = [int(i) for i in np.flatnonzero(np.abs(resid) <= 1e-7)]
    return LpSolution(status="optimal", z=z, objective=obj,
                      dual_objective=dual_obj, duals_ub=duals_ub,
                      duals_eq=duals_eq, active_ub=tuple(active),
                      basis=basis, iterations=iters)


# ---------------------------------------------------------------------------
# multi-parametric LP


@dataclass(frozen=True)
class PwaRegion:
    """One critical region: polyhedron H l <= h with affine law J l + q."""

    H: np.ndarray
    h: np.ndarray
    J: np.ndarray
    q: np.ndarray
    basis: tuple[int, ...] = field(compare=False, default=())

    def contains(self, l, tol=FACET_TOL) -> bool:
        return bool(np.all(self.H @ l <= self.h + tol))


@dataclass
class PwaLaw:
    """Piecewise-affine explicit solution over a box domain.

    Evaluation scans regions (hot-region cache first) and returns the affine
    law of the first hit; the outputs are the requested coordinates of the
    LP optimizer (by default the full z vector).
    """

    regions: list[PwaRegion]
    domain_lo: np.ndarray
    domain_hi: np.ndarray
    output_indices: tuple[int, ...]
    report: dict = field(default_factory=dict)
    _hot: int = field(default=0, repr=False)

    @property
    def n_params(self) -> int:
        return self.domain_lo.shape[0]

    def in_domain(self, l) -> bool:
        l = np.asarray(l, dtype=float)
        return bool(np.all(l >= self.domain_lo - FACET_TOL)
                    and np.all(l <= self.domain_hi + FACET_TOL))


def eval_explicit(law: PwaLaw, l) -> np.ndarray | None:
    """Point-locate l and evaluate the affine law; None when uncovered."""
    l = np.asarray(l, dtype=float).reshape(-1)
    if not law.in_domain(l):
        return None
    order = [law._hot] + [i for i in range(len(law.regions)) if i != law._hot]
    for idx in order:
        reg = law.regions[idx]
        if reg.contains(l):
            law._hot = idx
            return reg.J @ l + reg.q
    return None


def _chebyshev(H, h, lo, hi):
    """Chebyshev center/radius of {H l <= h} intersected with a box."""
    n_l = lo.shape[0]
    rows = [H]
    rhs = [h]
    eye = np.eye(n_l)
    rows += [eye, -eye]
    rhs += [hi, -lo]
    Hall = np.vstack(rows)
    hall = np.concatenate(rhs)
    norms = np.linalg.norm(Hall, axis=1)
    keep = norms > 1e-12
    Hall, hall, norms = Hall[keep], hall[keep], norms[keep]
    # vars: (l, r): max r  s.t.  H l + ||H_i|| r <= h
    c = np.zeros(n_l + 1)
    c[-1] = -1.0
    A_ub = np.hstack([Hall, norms[:, None]])
    lb = np.concatenate([np.full(n_l, -np.inf), [0.0]])
    sol = solve_lp(LpStandard(c=c, A_ub=A_ub, b_ub=hall, lb=lb))
    if sol.status != "optimal":
        return None, -np.inf
    return sol.z[:n_l], float(sol.z[-1])


def _region_of_basis(comp: _Computational, basis, output_indices):
    """Critical region and affine law for an optimal basis."""
    m = comp.A.shape[0]
    A_full = np.hstack([comp.A, np.eye(m)])
    B = np.linalg.inv(A_full[:, list(basis)])
    T = B @ comp.S      # basic solution sensitivity: w_B(l) = B b0 + T l
    w0 = B @ comp.b0
    # feasibility of the basic solution defines the region: w_B(l) >= 0
    H = -T
    h = w0.copy()
    # law: z(l) = shift + P[:, basis] w_B(l)
    P = comp.recovery_map()
    n_cols = P.shape[1]
    Pb = np.zeros((P.shape[0], m))
    for i, bi in enumerate(basis):
        if bi < n_cols:
            Pb[:, i] = P[:, bi]
    J_full = Pb @ T
    q_full = comp.shift + Pb @ w0
    sel = list(output_indices)
    return PwaRegion(H=H, h=h, J=J_full[sel], q=q_full[sel], basis=tuple(basis))


def solve_mplp(lp: LpStandard, domain_lo, domain_hi, output_indices=None,
               max_regions=20_000, min_radius=1e-9) -> PwaLaw:
    """Explicit solution of an RHS-parametric LP over a bounded box.

    Active-set exploration: solve at a seed, build the critical region of the
    optimal basis, then push across every facet and re-solve just outside.
    Degenerate slivers (Chebyshev radius below min_radius) are dropped; a
    region budget yields a partial law with the shortfall noted in .report.
    """
    if lp.n_params == 0:
        raise ValueError("solve_mplp needs a parameter embedding (S_ub/S_eq)")
    if lp.n_params > 6:
        raise ValueError("parameter dimension > 6 is not supported")
    lo = np.asarray(domain_lo, dtype=float).reshape(-1)
    hi = np.asarray(domain_hi, dtype=float).reshape(-1)
    if lo.shape[0] != lp.n_params or np.any(lo >= hi):
        raise ValueError("domain box must be bounded with lo < hi")
    if output_indices is None:
        output_indices = tuple(range(lp.n_vars))
    comp = _Computational(lp)
    scale = float(np.max(hi - lo))

    regions: list[PwaRegion] = []
    seen_bases: set[tuple[int, ...]] = set()
    n_solves = 0
    exhausted = False

    def covered(l):
        return any(r.contains(l) for r in regions)

    def solve_at(l):
        nonlocal n_solves
        n_solves += 1
        return solve_lp(lp, l=l)

    # seed queue: box center plus corners (helps disconnected feasible sets)
    seeds = [0.5 * (lo + hi)]
    corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1).reshape(-1, lp.n_params)
    seeds += [0.5 * (c + 0.5 * (lo + hi)) for c in corners]

    queue: list[np.ndarray] = list(seeds)
    while queue:
        if len(regions) >= max_regions:
            exhausted = True
            break
        l = queue.pop(0)
        if np.any(l < lo - FACET_TOL) or np.any(l > hi + FACET_TOL) or covered(l):
            continue
        sol = solve_at(l)
        if sol.status != "optimal":
            continue
        if sol.basis in seen_bases:
            continue
        seen_bases.add(sol.basis)
        reg = _region_of_basis(comp, sol.basis, output_indices)
        center, radius = _chebyshev(reg.H, reg.h, lo, hi)
        if radius < min_radius:
            continue
        regions.append(reg)

        # cross every facet of the new region
        norms = np.linalg.norm(reg.H, axis=1)
        for i in range(reg.H.shape[0]):
            if norms[i] < 1e-12:
                continue
            Hi = reg.H[i] / norms[i]
            hi_i = reg.h[i] / norms[i]
            # cheap facet point: project the Chebyshev center onto the
            # hyperplane; fall back to a facet Chebyshev LP if that leaves
            # the region
            fp = center + (hi_i - Hi @ center) * Hi
            others = np.ones(reg.H.shape[0], dtype=bool)
            others[i] = False
            if reg.H[others].size and np.any(
                reg.H[others] @ fp > reg.h[others] + 1e-7 * scale
            ):
                fp, fr = _chebyshev(
                    np.vstack([reg.H, Hi, -Hi]),
                    np.concatenate([reg.h, [hi_i + 1e-12], [-(hi_i - 1e-12)]]),
                    lo, hi,
                )
                if fp is None:
                    continue
            for eps in (1e-7, 1e-5, 1e-3):
                probe = fp + eps * scale * Hi
                if np.any(probe < lo) or np.any(probe > hi):
                    continue
                if not reg.contains(probe, tol=0.0):
                    queue.append(probe)
                    break

    report = {
        "n_regions": len(regions),
        "n_lp_solves": n_solves,
        "budget_exhausted": exhausted,
    }
    return PwaLaw(regions=regions, domain_lo=lo, domain_hi=hi,
                  output_indices=tuple(output_indices), report=report)


# ---------------------------------------------------------------------------
# explicit-law serialization (structured text, bit-exact round-trip)


def _fmt_vec(v):
    return "[" + ", ".join(repr(float(x)) for x in v) + "]"


def _fmt_mat(M):
    return "[" + ", ".join(_fmt_vec(row) for row in M) + "]"


def save_law(law: PwaLaw, path) -> None:
    lines = ["[law]"]
    lines.append(f"n_params = {law.n_params}")
    lines.append(f"domain_lo = {_fmt_vec(law.domain_lo)}")
    lines.append(f"domain_hi = {_fmt_vec(law.domain_hi)}")
    lines.append(f"output_indices = [{', '.join(str(i) for i in law.output_indices)}]")
    lines.append(f"n_regions = {len(law.regions)}")
    for reg in law.regions:
        lines.append("")
        lines.append("[[region]]")
        lines.append(f"H = {_fmt_mat(reg.H)}")
        lines.append(f"h = {_fmt_vec(reg.h)}")
        lines.append(f"J = {_fmt_mat(reg.J)}")
        lines.append(f"q = {_fmt_vec(reg.q)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_law(path) -> PwaLaw:
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    meta = doc["law"]
    regions = []
    for row in doc.get("region", []):
        regions.append(PwaRegion(
            H=np.array(row["H"], dtype=float),
            h=np.array(row["h"], dtype=float),
            J=np.array(row["J"], dtype=float),
            q=np.array(row["q"], dtype=float),
        ))
    if len(regions) != int(meta["n_regions"]):
        raise ValueError("law file corrupt: region count mismatch")
    return PwaLaw(
        regions=regions,
        domain_lo=np.array(meta["domain_lo"], dtype=float),
        domain_hi=np.array(meta["domain_hi"], dtype=float),
        output_indices=tuple(int(i) for i in meta["output_indices"]),
        report={"n_regions": len(regions)},
    )
