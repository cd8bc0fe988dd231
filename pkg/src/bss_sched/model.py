"""Assembly of the station scheduling MILP as a solver-agnostic instance.

Variables per battery b and hour t: charge power, discharge power, stored
energy, and a binary fully-charged indicator; plus the grid exchange power
per hour. Constraint families: exchange balance, fully-charged indicator
linearization, swap-demand balance, conditional stored-energy dynamics,
and net-load ramp (variability) bands.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import BssConfig, FeederSeries, Schedule

ROLES = ("p_ch", "p_dch", "soc", "full", "p_exchange")
LE, EQ, GE = "<=", "=", ">="


class ModelError(ValueError):
    """Invalid model construction request."""


@dataclass(frozen=True)
class VariableMap:
    """Bijection between (role, battery, period) and column indices.

    Ordering is role-major, then battery, then period. Periods are 1-based
    (hours 1..T); battery ids are 0-based.
    """

    fleet_size: int
    horizon: int

    @property
    def n_columns(self) -> int:
        return 4 * self.fleet_size * self.horizon + self.horizon

    def column(self, role: str, b: int | None, t: int) -> int:
        B, T = self.fleet_size, self.horizon
        if not 1 <= t <= T:
            raise ModelError(f"period {t} outside 1..{T}")
        if role == "p_exchange":
            return 4 * B * T + (t - 1)
        r = ROLES.index(role)
        if b is None or not 0 <= b < B:
            raise ModelError(f"battery {b} outside 0..{B - 1}")
        return r * B * T + b * T + (t - 1)

    def unpack(self, k: int):
        """Inverse of column(): k -> (role, battery or None, period)."""
        B, T = self.fleet_size, self.horizon
        if not 0 <= k < self.n_columns:
            raise ModelError(f"column {k} out of range")
        if k >= 4 * B * T:
            return ("p_exchange", None, k - 4 * B * T + 1)
        r, rem = divmod(k, B * T)
        b, t0 = divmod(rem, T)
        return (ROLES[r], b, t0 + 1)

    def name(self, k: int) -> str:
        role, b, t = self.unpack(k)
        if role == "p_exchange":
            return f"p_exchange_{t}"
        return f"{role}_{b}_{t}"

    def names(self) -> list:
        return [self.name(k) for k in range(self.n_columns)]


class Variable(NamedTuple):
    name: str
    lb: float
    ub: float
    is_integer: bool
    obj: float


class Row(NamedTuple):
    name: str
    cols: tuple        # column indices
    coefs: tuple       # matching coefficients
    sense: str         # "<=", "=", ">="
    rhs: float


@dataclass
class MilpInstance:
    """Minimization MILP with bounded columns and sparse rows."""

    variables: list
    constraints: list
    sense: str = "min"

    @property
    def n_cols(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def objective(self) -> np.ndarray:
        return np.array([v.obj for v in self.variables], dtype=float)

    def bounds(self):
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def integrality(self) -> np.ndarray:
        return np.array([v.is_integer for v in self.variables], dtype=bool)

    def row_arrays(self):
        """(senses list, rhs array) in row order."""
        senses = [r.sense for r in self.constraints]
        rhs = np.array([r.rhs for r in self.constraints], dtype=float)
        return senses, rhs

    def dense_matrix(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_cols))
        for i, row in enumerate(self.constraints):
            A[i, list(row.cols)] = row.coefs
        return A

    def sparse_matrix(self):
        from scipy.sparse import csr_matrix

        data, indices, indptr = [], [], [0]
        for row in self.constraints:
            indices.extend(row.cols)
            data.extend(row.coefs)
            indptr.append(len(indices))
        return csr_matrix(
            (np.array(data, float), np.array(indices, np.int64), np.array(indptr, np.int64)),
            shape=(self.n_rows, self.n_cols),
        )

    def validate(self) -> "MilpInstance":
        names = set()
        used = np.zeros(self.n_cols, dtype=bool)
        for v in self.variables:
            if v.name in names:
                raise ModelError(f"duplicate variable name {v.name}")
            names.add(v.name)
            if not np.isfinite(v.obj):
                raise ModelError(f"non-finite objective coefficient on {v.name}")
            if v.lb > v.ub or v.ub == -np.inf or v.lb == np.inf:
                raise ModelError(f"empty bound interval on {v.name}")
        rnames = set()
        for row in self.constraints:
            if row.name in rnames:
                raise ModelError(f"duplicate row name {row.name}")
            rnames.add(row.name)
            if row.sense not in (LE, EQ, GE):
                raise ModelError(f"bad sense {row.sense} in {row.name}")
            if not np.isfinite(row.rhs):
                raise ModelError(f"non-finite rhs in {row.name}")
            for c, a in zip(row.cols, row.coefs):
                if not 0 <= c < self.n_cols:
                    raise ModelError(f"row {row.name} references column {c}")
                if not np.isfinite(a):
                    raise ModelError(f"non-finite coefficient in {row.name}")
                used[c] = True
        for k, v in enumerate(self.variables):
            if not used[k] and v.obj == 0.0:
                raise ModelError(f"variable {v.name} appears nowhere")
        return self


def index_variables(cfg: BssConfig) -> VariableMap:
    B, T = cfg.fleet_size, cfg.horizon
    if B * T > 50_000_000:
        raise ModelError(f"fleet x horizon too large ({B}x{T})")
    return VariableMap(fleet_size=B, horizon=T)


def build_objective(cfg: BssConfig, series: FeederSeries, vmap: VariableMap) -> np.ndarray:
    """Cost coefficients: price[t] * tau on the exchange power, zero elsewhere."""
    obj = np.zeros(vmap.n_columns)
    for t in range(1, vmap.horizon + 1):
        obj[vmap.column("p_exchange", None, t)] = series.price[t - 1] * cfg.tau
    return obj


def build_variables(cfg: BssConfig, series: FeederSeries, vmap: VariableMap) -> list:
    """Columns with their bounds (power ratings, energy window, grid limit)."""
    obj = build_objective(cfg, series, vmap)
    out = []
    for k in range(vmap.n_columns):
        role, b, t = vmap.unpack(k)
        if role == "p_ch":
            lb, ub, is_int = 0.0, cfg.p_ch_max, False
        elif role == "p_dch":
            lb, ub, is_int = 0.0, cfg.p_dch_max, False
        elif role == "soc":
            lb, ub, is_int = cfg.cap_min, cfg.cap_max, False
        elif role == "full":
            lb, ub, is_int = 0.0, 1.0, True
        else:  # p_exchange
            lb, ub, is_int = -cfg.p_grid_max, cfg.p_grid_max, False
        out.append(Variable(vmap.name(k), lb, ub, is_int, float(obj[k])))
    return out


def build_exchange_constraints(cfg: BssConfig, vmap: VariableMap) -> list:
    """Per hour: exchange power equals the fleet charge minus discharge sum."""
    rows = []
    B = cfg.fleet_size
    for t in range(1, vmap.horizon + 1):
        cols = [vmap.column("p_exchange", None, t)]
        coefs = [1.0]
        for b in range(B):
            cols.append(vmap.column("p_ch", b, t))
            coefs.append(-1.0)
            cols.append(vmap.column("p_dch", b, t))
            coefs.append(1.0)
        rows.append(Row(f"exch_t{t}", tuple(cols), tuple(coefs), EQ, 0.0))
    return rows


def build_swap_constraints(cfg: BssConfig, series: FeederSeries, vmap: VariableMap) -> list:
    """Fully-charged indicator linearization plus the swap-demand balance.

    Indicator rows per (b, t):
      full - M*soc >= 1 - M*cap_max   (forces full=1 when soc is at cap_max)
      full - eps*soc <= 1 - eps*cap_max  (forces full=0 when soc is short)
    Demand rows for t >= 2: sum_b full[b, t-1] = demand[t]; the t=1 balance
    is satisfied structurally by init_full (validated, no row emitted).
    """
    rows = []
    M, eps, cmax = cfg.big_m, cfg.eps, cfg.cap_max
    for b in range(cfg.fleet_size):
        for t in range(1, vmap.horizon + 1):
            xf = vmap.column("full", b, t)
            sc = vmap.column("soc", b, t)
            rows.append(Row(f"full_lb_b{b}_t{t}", (xf, sc), (1.0, -M), GE, 1.0 - M * cmax))
            rows.append(Row(f"full_ub_b{b}_t{t}", (xf, sc), (1.0, -eps), LE, 1.0 - eps * cmax))
    sense = EQ if cfg.demand_relaxation == "eq" else GE
    for t in range(2, vmap.horizon + 1):
        cols = tuple(vmap.column("full", b, t - 1) for b in range(cfg.fleet_size))
        rows.append(Row(f"demand_t{t}", cols, (1.0,) * len(cols), sense, float(series.demand[t - 1])))
    return rows


def build_battery_constraints(cfg: BssConfig, vmap: VariableMap) -> list:
    """Conditional stored-energy dynamics via big-M pairs.

    With expr = soc[b,t] - eta_ch*tau*p_ch[b,t] + eta_dch*tau*p_dch[b,t]:
      swapped branch (active when full[b,t-1] = 1):  expr = cap_init
      holding branch (active when full[b,t-1] = 0):  expr = soc[b,t-1]
    At t=1 the previous state comes from init_full/init_soc as constants.
    Power ratings and the energy window are variable bounds, not rows.

    Because a battery can only count as full when its stored energy sits
    exactly at cap_max, both branches collapse to one linear identity:
    expr = soc[b,t-1] - (cap_max - cap_init) * full[b,t-1].  The hold pair
    states that identity as two inequalities, which keeps the LP
    relaxation tight; the swap pair keeps the branch form with a
    relaxation constant that only has to cover the energy window plus one
    hour of charging and discharging.  Integer feasibility is unchanged.
    """
    rows = []
    ech, edch, tau = cfg.eta_ch, cfg.eta_dch, cfg.tau
    M = (cfg.cap_max - cfg.cap_min) + ech * tau * cfg.p_ch_max + edch * tau * cfg.p_dch_max
    drop = cfg.cap_max - cfg.cap_init
    full0 = set(cfg.init_full)
    for b in range(cfg.fleet_size):
        for t in range(1, vmap.horizon + 1):
            sc = vmap.column("soc", b, t)
            pc = vmap.column("p_ch", b, t)
            pd = vmap.column("p_dch", b, t)
            expr_cols = (sc, pc, pd)
            expr_coefs = (1.0, -ech * tau, edch * tau)
            if t == 1:
                x0 = 1.0 if b in full0 else 0.0
                c0 = cfg.init_soc[b]
                rows.append(Row(f"swap_ub_b{b}_t{t}", expr_cols, expr_coefs, LE,
                                cfg.cap_init + M * (1.0 - x0)))
                rows.append(Row(f"swap_lb_b{b}_t{t}", expr_cols, expr_coefs, GE,
                                cfg.cap_init - M * (1.0 - x0)))
                rows.append(Row(f"hold_ub_b{b}_t{t}", expr_cols, expr_coefs, LE,
                                c0 - drop * x0))
                rows.append(Row(f"hold_lb_b{b}_t{t}", expr_cols, expr_coefs, GE,
                                c0 - drop * x0))
            else:
                xprev = vmap.column("full", b, t - 1)
                sprev = vmap.column("soc", b, t - 1)
                rows.append(Row(f"swap_ub_b{b}_t{t}", expr_cols + (xprev,),
                                expr_coefs + (M,), LE, cfg.cap_init + M))
                rows.append(Row(f"swap_lb_b{b}_t{t}", expr_cols + (xprev,),
                                expr_coefs + (-M,), GE, cfg.cap_init - M))
                rows.append(Row(f"hold_ub_b{b}_t{t}", expr_cols + (sprev, xprev),
                                expr_coefs + (-1.0, drop), LE, 0.0))
                rows.append(Row(f"hold_lb_b{b}_t{t}", expr_cols + (sprev, xprev),
                                expr_coefs + (-1.0, drop), GE, 0.0))
    return rows


def build_variability_constraints(cfg: BssConfig, net_load, vmap: VariableMap,
                                  label: str = "var") -> list:
    """Ramp band rows for t = 2..T (no exchange power exists before hour 1).

    With delta[t] = net_load[t] - net_load[t-1], the exchange ramp is held in
    [-delta_u - delta[t], delta_u - delta[t]] so the feeder net load ramp
    stays within +-delta_u.
    """
    net = np.asarray(net_load, dtype=float)
    if len(net) != vmap.horizon:
        raise ModelError("net_load length mismatch")
    rows = []
    for t in range(2, vmap.horizon + 1):
        delta = net[t - 1] - net[t - 2]
        cols = (vmap.column("p_exchange", None, t), vmap.column("p_exchange", None, t - 1))
        coefs = (1.0, -1.0)
        rows.append(Row(f"{label}_ub_t{t}", cols, coefs, LE, cfg.delta_u - delta))
        rows.append(Row(f"{label}_lb_t{t}", cols, coefs, GE, -cfg.delta_u - delta))
    return rows


def build_symmetry_constraints(cfg: BssConfig, vmap: VariableMap) -> list:
    """Optional tie-break rows ordering first-period stored energy.

    Within each group of interchangeable batteries (same initial energy and
    same initial fully-charged state) any feasible plan can be re-indexed so
    soc[b,1] is nonincreasing, so these rows cut symmetric copies without
    changing the optimal cost.
    """
    rows = []
    full0 = set(cfg.init_full)
    for b in range(cfg.fleet_size - 1):
        same = (
            abs(cfg.init_soc[b] - cfg.init_soc[b + 1]) < 1e-12
            and (b in full0) == ((b + 1) in full0)
        )
        if same:
            cols = (vmap.column("soc", b, 1), vmap.column("soc", b + 1, 1))
            rows.append(Row(f"sym_b{b}", cols, (1.0, -1.0), GE, 0.0))
    return rows


def assemble_model(cfg: BssConfig, series: FeederSeries, variability: bool = False,
                   extra_scenarios=(), symmetry_break: bool = False) -> MilpInstance:
    """Concatenate all builders in a fixed deterministic order.

    ``extra_scenarios`` is a sequence of perturbed net-load arrays; each adds
    its own set of ramp band rows (used by the robust cutting-plane loop).
    """
    vmap = index_variables(cfg)
    variables = build_variables(cfg, series, vmap)
    rows = []
    rows += build_exchange_constraints(cfg, vmap)
    rows += build_swap_constraints(cfg, series, vmap)
    rows += build_battery_constraints(cfg, vmap)
    if variability:
        rows += build_variability_constraints(cfg, series.net_load, vmap)
    for k, net in enumerate(extra_scenarios):
        rows += build_variability_constraints(cfg, net, vmap, label=f"scen{k}")
    if symmetry_break:
        rows += build_symmetry_constraints(cfg, vmap)
    return MilpInstance(variables=variables, constraints=rows).validate()


def schedule_from_values(x, vmap: VariableMap, series: FeederSeries) -> Schedule:
    """Unpack a flat column-value vector into a Schedule (feeder load derived)."""
    x = np.asarray(x, dtype=float)
    B, T = vmap.fleet_size, vmap.horizon
    BT = B * T
    p_ch = x[0:BT].reshape(B, T).copy()
    p_dch = x[BT:2 * BT].reshape(B, T).copy()
    soc = x[2 * BT:3 * BT].reshape(B, T).copy()
    full = x[3 * BT:4 * BT].reshape(B, T).copy()
    p_exchange = x[4 * BT:4 * BT + T].copy()
    return Schedule(
        p_ch=p_ch, p_dch=p_dch, soc=soc, full=full,
        p_exchange=p_exchange, p_feeder=p_exchange + series.net_load,
    )


def instances_equivalent(a: MilpInstance, b: MilpInstance, tol: float = 0.0) -> bool:
    """Structural equality, ignoring variable/row names and within-row order."""
    if a.n_cols != b.n_cols or a.n_rows != b.n_rows:
        return False

    def close(u, v):
        return abs(u - v) <= tol

    for va, vb in zip(a.variables, b.variables):
        if va.is_integer != vb.is_integer:
            return False
        for fa, fb in ((va.lb, vb.lb), (va.ub, vb.ub), (va.obj, vb.obj)):
            if fa != fb and not (np.isinf(fa) and fa == fb) and not close(fa, fb):
                return False
    for ra, rb in zip(a.constraints, b.constraints):
        if ra.sense != rb.sense or not close(ra.rhs, rb.rhs):
            return False
        da = {c: v for c, v in zip(ra.cols, ra.coefs) if v != 0.0}
        db = {c: v for c, v in zip(rb.cols, rb.coefs) if v != 0.0}
        if set(da) != set(db):
            return False
        if any(not close(da[c], db[c]) for c in da):
            return False
    return True
