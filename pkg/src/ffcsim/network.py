"""Static network model: buses, branches, generator/converter parameter
records, DC power-flow algebra (incidence, susceptance Laplacian, line flows)
and the structured-text case schema (load + serialize).

Conventions: one system-wide MVA base (s_base); every power stored on it
unless a field is explicitly marked converter per-unit.  Bus numbers are
1-based in case files, 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .vscdevice import DcSideParams, VscControlGains, VscDevice, VscElectricalParams

__all__ = [
    "CaseError",
    "Branch",
    "NetworkGraph",
    "SyncGenParams",
    "VscUnitParams",
    "GridCase",
    "build_laplacian",
    "load_case",
    "save_case",
    "bundled_case_path",
]


class CaseError(ValueError):
    """Case file violates the schema or a model invariant."""


@dataclass(frozen=True)
class Branch:
    from_bus: int  # 0-based
    to_bus: int
    x: float       # series reactance, p.u.
    limit: float   # |flow| limit, p.u.


def build_laplacian(branches, n_bus=None):
    """Incidence matrix G, line susceptance matrix Xb = diag(1/x) and bus
    susceptance Laplacian L = G^T Xb G for a connected branch list."""
    branches = list(branches)
    if not branches:
        raise CaseError("network needs at least one branch")
    if n_bus is None:
        n_bus = max(max(b.from_bus, b.to_bus) for b in branches) + 1
    n_b = len(branches)
    G = np.zeros((n_b, n_bus))
    x = np.empty(n_b)
    for k, b in enumerate(branches):
        if b.x <= 0:
            raise CaseError(
                f"branch {b.from_bus + 1}-{b.to_bus + 1}: reactance must be > 0, got {b.x}"
            )
        if not (0 <= b.from_bus < n_bus and 0 <= b.to_bus < n_bus):
            raise CaseError(f"branch {k}: bus index out of range")
        G[k, b.from_bus] = 1.0
        G[k, b.to_bus] = -1.0
        x[k] = b.x
    Xb = np.diag(1.0 / x)
    L = G.T @ Xb @ G

    comps = _components(n_bus, branches)
    if len(comps) > 1:
        listing = "; ".join(
            "{" + ",".join(str(i + 1) for i in sorted(c)) + "}" for c in comps
        )
        raise CaseError(f"network graph is disconnected: components {listing}")
    return G, Xb, L


def _components(n_bus, branches):
    adj = [[] for _ in range(n_bus)]
    for b in branches:
        adj[b.from_bus].append(b.to_bus)
        adj[b.to_bus].append(b.from_bus)
    seen = [False] * n_bus
    comps = []
    for start in range(n_bus):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in adj[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(comp)
    return comps


@dataclass(frozen=True)
class NetworkGraph:
    """Branch topology with precomputed DC power-flow matrices."""

    n_n: int
    branches: tuple[Branch, ...]
    G: np.ndarray = field(repr=False, default=None)   # type: ignore[assignment]
    Xb: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    L: np.ndarray = field(repr=False, default=None)   # type: ignore[assignment]

    def __post_init__(self):
        G, Xb, L = build_laplacian(self.branches, self.n_n)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "Xb", Xb)
        object.__setattr__(self, "L", L)

    @property
    def n_b(self) -> int:
        return len(self.branches)

    def line_flows(self, theta: np.ndarray) -> np.ndarray:
        """Branch flows p_b = Xb G theta for a bus-angle vector (rad)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_n,):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({self.n_n},)"
            )
        return self.Xb @ (self.G @ theta)

    def flow_limits(self) -> np.ndarray:
        return np.array([b.limit for b in self.branches])

    def solve_angles(self, p_inj: np.ndarray, ref_bus: int) -> np.ndarray:
        """Bus angles for given injections with theta[ref_bus] = 0.

        Injections must balance (sum to zero) for an exact DC solution.
        """
        p_inj = np.asarray(p_inj, dtype=float)
        keep = [i for i in range(self.n_n) if i != ref_bus]
        theta = np.zeros(self.n_n)
        theta[keep] = np.linalg.solve(self.L[np.ix_(keep, keep)], p_inj[keep])
        return theta


@dataclass(frozen=True)
class SyncGenParams:
    """Third-order synchronous generator record (system p.u.)."""

    bus: int          # 0-based
    M_s: float        # inertia constant, p.u.*s
    D_s: float        # damping, p.u.
    T_g: float        # governor time constant, s
    K_g: float        # governor gain (inverse droop), p.u.
    p_m_star: float   # mechanical setpoint, p.u.
    x_int: float = 0.05  # machine internal + step-up reactance, system p.u.

    def __post_init__(self):
        for name in ("M_s", "D_s", "T_g", "K_g", "x_int"):
            if getattr(self, name) <= 0:
                raise CaseError(f"sg at bus {self.bus + 1}: {name} must be > 0")


@dataclass(frozen=True)
class VscUnitParams:
    """Grid-level converter record.  Droop/setpoints/limits are converter
    per-unit on the unit's own rating; network coupling rescales by
    rating/s_base."""

    bus: int
    rp: float
    rq: float
    omega_f: float
    p_c_star: float
    q_c_star: float
    omega_c_star: float
    v_c_star: float
    rating_mw: float
    battery_mwh: float
    soc_min: float
    soc_max: float
    soc0: float
    p_min: float
    p_max: float
    k_p: float
    x_int: float | None = None   # plant coupling reactance, system p.u.
    meas_lag: float = 0.009      # power-measurement front-end lag, s
    elec: VscElectricalParams = field(default_factory=VscElectricalParams)
    gains: VscControlGains = field(default_factory=VscControlGains)
    dc: DcSideParams | None = None

    def __post_init__(self):
        tag = f"vsc at bus {self.bus + 1}"
        if self.rp <= 0:
            raise CaseError(f"{tag}: rp must be > 0")
        if self.omega_f <= 0:
            raise CaseError(f"{tag}: omega_f must be > 0")
        if not (0.0 <= self.soc_min < self.soc_max <= 1.0):
            raise CaseError(f"{tag}: SoC limits must satisfy 0 <= min < max <= 1")
        if not (self.soc_min <= self.soc0 <= self.soc_max):
            raise CaseError(f"{tag}: initial SoC outside limits")
        if self.p_min >= self.p_max:
            raise CaseError(f"{tag}: power limits must satisfy p_min < p_max")
        if not (0.0 < self.k_p <= 1.0):
            raise CaseError(f"{tag}: participation k_p must be in (0, 1]")
        if self.rating_mw <= 0 or self.battery_mwh <= 0:
            raise CaseError(f"{tag}: rating and battery capacity must be > 0")
        if self.x_int is not None and self.x_int <= 0:
            raise CaseError(f"{tag}: x_int must be > 0")
        if self.meas_lag < 0:
            raise CaseError(f"{tag}: meas_lag must be >= 0")
        if self.dc is None:
            object.__setattr__(self, "dc", DcSideParams(e_b=self.e_b_seconds()))

    def e_b_seconds(self) -> float:
        """Battery capacity in converter p.u. seconds (s at rated power)."""
        return self.battery_mwh * 3600.0 / self.rating_mw

    def x_int_sys(self, s_base: float) -> float:
        """Coupling reactance in system p.u.: the plant-equivalent value
        when given, otherwise the device transformer rebased."""
        if self.x_int is not None:
            return self.x_int
        return self.elec.l_t * s_base / self.rating_mw

    def device(self) -> VscDevice:
        """Detailed device model parametrized from this record."""
        return VscDevice(
            elec=self.elec, gains=self.gains, dc=self.dc,
            rp=self.rp, rq=self.rq, omega_f=self.omega_f,
            p_star=self.p_c_star, q_star=self.q_c_star,
            omega_star=self.omega_c_star, v_star=self.v_c_star,
        )


@dataclass(frozen=True)
class GridCase:
    """Immutable bundle of network + unit parameters + dispatch context."""

    name: str
    network: NetworkGraph
    sgs: tuple[SyncGenParams, ...]
    vscs: tuple[VscUnitParams, ...]
    f_b: float
    s_base: float
    p_load: np.ndarray  # per-bus load, p.u. on s_base

    def __post_init__(self):
        n = self.network.n_n
        if self.f_b <= 0 or self.s_base <= 0:
            raise CaseError("f_b and s_base must be > 0")
        p_load = np.asarray(self.p_load, dtype=float)
        if p_load.shape != (n,):
            raise CaseError(f"p_load needs {n} entries, got {p_load.shape}")
        object.__setattr__(self, "p_load", p_load)
        unit_buses = [u.bus for u in self.sgs] + [u.bus for u in self.vscs]
        for b in unit_buses:
            if not (0 <= b < n):
                raise CaseError(f"unit bus {b + 1} outside the {n}-bus network")
        if len(set(unit_buses)) != len(unit_buses):
            raise CaseError("two units share a bus; one unit per bus supported")
        if self.vscs:
            ksum = sum(u.k_p for u in self.vscs)
            if abs(ksum - 1.0) > 1e-9:
                raise CaseError(
                    f"participation coefficients must sum to 1 over FFC units, got {ksum:.12g}"
                )
        imbalance = self.dispatch_injections().sum() - p_load.sum()
        if abs(imbalance) > 1e-6:
            raise CaseError(
                f"dispatch does not balance load: residual {imbalance:.6g} p.u."
            )

    @property
    def n_sg(self) -> int:
        return len(self.sgs)

    @property
    def n_vsc(self) -> int:
        return len(self.vscs)

    def vsc_scale(self, i: int) -> float:
        """rating / s_base: converts converter p.u. to system p.u."""
        return self.vscs[i].rating_mw / self.s_base

    def dispatch_injections(self) -> np.ndarray:
        """Per-bus generation dispatch, p.u. on s_base."""
        p = np.zeros(self.network.n_n)
        for g in self.sgs:
            p[g.bus] += g.p_m_star
        for i, u in enumerate(self.vscs):
            p[u.bus] += u.p_c_star * self.vsc_scale(i)
        return p

    def p_sched(self) -> np.ndarray:
        """Scheduled net injection per bus (generation minus load), p.u."""
        return self.dispatch_injections() - self.p_load

    def base_angles(self, ref_bus: int | None = None) -> np.ndarray:
        """Pre-disturbance DC power-flow angles (reference defaults to the
        last bus, the aggregate-machine slack)."""
        if ref_bus is None:
            ref_bus = self.network.n_n - 1
        return self.network.solve_angles(self.p_sched(), ref_bus)

    def base_flows(self) -> np.ndarray:
        return self.network.line_flows(self.base_angles())


# ---------------------------------------------------------------------------
# case schema (structured text, TOML syntax)

_BASE_KEYS = {"f_b", "s_base"}
_NETWORK_KEYS = {"name", "n_bus", "p_load"}
_BRANCH_KEYS = {"from", "to", "x", "limit"}
_SG_KEYS = {"bus", "m", "d", "t_g", "k_g", "p_m_star", "x_int"}
_VSC_KEYS = {
    "bus", "rp", "rq", "omega_f", "p_c_star", "q_c_star", "omega_c_star",
    "v_c_star", "rating_mw", "battery_mwh", "soc_min", "soc_max", "soc0",
    "p_min", "p_max", "k_p", "x_int", "meas_lag", "electrical", "gains", "dc",
}
_ELEC_KEYS = {"r_f", "l_f", "c_f", "r_t", "l_t", "omega_b"}
_GAIN_KEYS = {"Kp_v", "Ki_v", "Kf_v", "Kp_i", "Ki_i", "Kf_i", "Kp_dc", "Ki_dc", "Kf_dc"}
_DC_KEYS = {"c_dc", "g_dc", "v_dc_star"}


def _check_keys(table, allowed, where):
    unknown = set(table) - allowed
    if unknown:
        raise CaseError(f"{where}: unknown field(s) {sorted(unknown)}")


def _get(table, key, where, kind=float):
    if key not in table:
        raise CaseError(f"{where}: missing field '{key}'")
    try:
        return kind(table[key])
    except (TypeError, ValueError):
        raise CaseError(f"{where}: field '{key}' is not a {kind.__name__}") from None


def load_case(path) -> GridCase:
    """Parse and fully validate a case file; all invariants enforced here."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise CaseError(f"{path}: not valid case syntax: {exc}") from None

    _check_keys(doc, {"base", "network", "branch", "sg", "vsc"}, str(path))
    for section in ("base", "network", "branch"):
        if section not in doc:
            raise CaseError(f"{path}: missing [{section}] section")

    base = doc["base"]
    _check_keys(base, _BASE_KEYS, "[base]")
    f_b = _get(base, "f_b", "[base]")
    s_base = _get(base, "s_base", "[base]")

    net = doc["network"]
    _check_keys(net, _NETWORK_KEYS, "[network]")
    name = str(net.get("name", path.stem))
    n_bus = _get(net, "n_bus", "[network]", int)
    if n_bus < 1:
        raise CaseError("[network]: n_bus must be >= 1")
    p_load = net.get("p_load")
    if not isinstance(p_load, list) or len(p_load) != n_bus:
        raise CaseError(f"[network]: p_load must be an array of {n_bus} values")
    p_load = np.array([float(v) for v in p_load])

    branches = []
    for k, row in enumerate(doc["branch"]):
        where = f"[[branch]] #{k + 1}"
        _check_keys(row, _BRANCH_KEYS, where)
        fb = _get(row, "from", where, int)
        tb = _get(row, "to", where, int)
        if not (1 <= fb <= n_bus and 1 <= tb <= n_bus):
            raise CaseError(f"{where}: bus numbers must be in 1..{n_bus}")
        branches.append(Branch(fb - 1, tb - 1,
                               _get(row, "x", where), _get(row, "limit", where)))

    sgs = []
    for k, row in enumerate(doc.get("sg", [])):
        where = f"[[sg]] #{k + 1}"
        _check_keys(row, _SG_KEYS, where)
        sgs.append(SyncGenParams(
            bus=_get(row, "bus", where, int) - 1,
            M_s=_get(row, "m", where),
            D_s=_get(row, "d", where),
            T_g=_get(row, "t_g", where),
            K_g=_get(row, "k_g", where),
            p_m_star=_get(row, "p_m_star", where),
            x_int=_get(row, "x_int", where),
        ))

    vscs = []
    for k, row in enumerate(doc.get("vsc", [])):
        where = f"[[vsc]] #{k + 1}"
        _check_keys(row, _VSC_KEYS, where)
        elec_tbl = row.get("electrical", {})
        _check_keys(elec_tbl, _ELEC_KEYS, f"{where}.electrical")
        gains_tbl = row.get("gains", {})
        _check_keys(gains_tbl, _GAIN_KEYS, f"{where}.gains")
        dc_tbl = row.get("dc", {})
        _check_keys(dc_tbl, _DC_KEYS, f"{where}.dc")
        rating = _get(row, "rating_mw", where)
        battery = _get(row, "battery_mwh", where)
        dc = DcSideParams(e_b=battery * 3600.0 / rating,
                          **{k: float(v) for k, v in dc_tbl.items()})
        vscs.append(VscUnitParams(
            bus=_get(row, "bus", where, int) - 1,
            rp=_get(row, "rp", where),
            rq=_get(row, "rq", where),
            omega_f=_get(row, "omega_f", where),
            p_c_star=_get(row, "p_c_star", where),
            q_c_star=_get(row, "q_c_star", where),
            omega_c_star=_get(row, "omega_c_star", where),
            v_c_star=_get(row, "v_c_star", where),
            rating_mw=rating,
            battery_mwh=battery,
            soc_min=_get(row, "soc_min", where),
            soc_max=_get(row, "soc_max", where),
            soc0=_get(row, "soc0", where),
            p_min=_get(row, "p_min", where),
            p_max=_get(row, "p_max", where),
            k_p=_get(row, "k_p", where),
            x_int=_get(row, "x_int", where) if "x_int" in row else None,
            meas_lag=_get(row, "meas_lag", where) if "meas_lag" in row else 0.009,
            elec=VscElectricalParams(**{k: float(v) for k, v in elec_tbl.items()}),
            gains=VscControlGains(**{k: float(v) for k, v in gains_tbl.items()}),
            dc=dc,
        ))

    try:
        network = NetworkGraph(n_n=n_bus, branches=tuple(branches))
        return GridCase(name=name, network=network, sgs=tuple(sgs),
                        vscs=tuple(vscs), f_b=f_b, s_base=s_base, p_load=p_load)
    except ValueError as exc:
        raise CaseError(f"{path}: {exc}") from None


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def save_case(case: GridCase, path) -> None:
    """Emit the identical structured-text format (round-trips bit-exact)."""
    lines = []
    lines.append("# ffcsim case file: powers in p.u. on s_base unless marked")
    lines.append("# converter p.u.; reactances p.u.; inertia p.u.*s; times s.")
    lines.append("")
    lines.append("[base]")
    lines.append(f"f_b = {_fmt(case.f_b)}")
    lines.append(f"s_base = {_fmt(case.s_base)}")
    lines.append("")
    lines.append("[network]")
    lines.append(f'name = "{case.name}"')
    lines.append(f"n_bus = {case.network.n_n}")
    load_str = ", ".join(_fmt(v) for v in case.p_load)
    lines.append(f"p_load = [{load_str}]")
    for b in case.network.branches:
        lines.append("")
        lines.append("[[branch]]")
        lines.append(f"from = {b.from_bus + 1}")
        lines.append(f"to = {b.to_bus + 1}")
        lines.append(f"x = {_fmt(b.x)}")
        lines.append(f"limit = {_fmt(b.limit)}")
    for g in case.sgs:
        lines.append("")
        lines.append("[[sg]]")
        lines.append(f"bus = {g.bus + 1}")
        lines.append(f"m = {_fmt(g.M_s)}")
        lines.append(f"d = {_fmt(g.D_s)}")
        lines.append(f"t_g = {_fmt(g.T_g)}")
        lines.append(f"k_g = {_fmt(g.K_g)}")
        lines.append(f"p_m_star = {_fmt(g.p_m_star)}")
        lines.append(f"x_int = {_fmt(g.x_int)}")
    for u in case.vscs:
        lines.append("")
        lines.append("[[vsc]]")
        lines.append(f"bus = {u.bus + 1}")
        for key, val in (
            ("rp", u.rp), ("rq", u.rq), ("omega_f", u.omega_f),
            ("p_c_star", u.p_c_star), ("q_c_star", u.q_c_star),
            ("omega_c_star", u.omega_c_star), ("v_c_star", u.v_c_star),
            ("rating_mw", u.rating_mw), ("battery_mwh", u.battery_mwh),
            ("soc_min", u.soc_min), ("soc_max", u.soc_max), ("soc0", u.soc0),
            ("p_min", u.p_min), ("p_max", u.p_max), ("k_p", u.k_p),
            ("meas_lag", u.meas_lag),
        ):
            lines.append(f"{key} = {_fmt(val)}")
        if u.x_int is not None:
            lines.append(f"x_int = {_fmt(u.x_int)}")
        e = u.elec
        lines.append("[vsc.electrical]")
        for key, val in (("r_f", e.r_f), ("l_f", e.l_f), ("c_f", e.c_f),
                         ("r_t", e.r_t), ("l_t", e.l_t), ("omega_b", e.omega_b)):
            lines.append(f"{key} = {_fmt(val)}")
        g = u.gains
        lines.append("[vsc.gains]")
        for key in ("Kp_v", "Ki_v", "Kf_v", "Kp_i", "Ki_i", "Kf_i",
                    "Kp_dc", "Ki_dc", "Kf_dc"):
            lines.append(f"{key} = {_fmt(getattr(g, key))}")
        lines.append("[vsc.dc]")
        for key in ("c_dc", "g_dc", "v_dc_star"):
            lines.append(f"{key} = {_fmt(getattr(u.dc, key))}")
    Path(path).write_text("\n".join(lines) + "\n")


def bundled_case_path(name: str = "ieee39_ffc") -> Path:
    """Path of a case file shipped with the package."""
    return Path(__file__).parent / "cases" / f"{name}.toml"
