"""Best-first branch-and-bound on top of the bundled LP solver.

Branches on the most fractional integer column (ties broken by lowest
column index); nodes are explored lowest-LP-bound first with the node id
as the deterministic tie-break. Intended for desk-scale instances; large
models route through the external-solver bridge instead.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import MilpInstance
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, _solve_rows


@dataclass
class MipOptions:
    mip_gap: float = 1e-6
    int_tol: float = 1e-5
    feas_tol: float = 1e-7
    time_limit: float | None = None
    node_limit: int | None = None


@dataclass
class MipResult:
    status: str                      # optimal | infeasible | unbounded | feasible | unknown
    x: np.ndarray | None = None
    objective: float | None = None
    bound: float = -math.inf
    gap: float = math.inf
    nodes: int = 0
    infeasible_rows: list = field(default_factory=list)
    wall_time: float = 0.0

    @staticmethod
    def compute_gap(objective, bound):
        if objective is None or not math.isfinite(bound):
            return math.inf
        return abs(objective - bound) / max(1.0, abs(objective))


def solve_milp(instance: MilpInstance, options: MipOptions | None = None) -> MipResult:
    """Exact branch-and-bound solve of a MilpInstance."""
    opts = options or MipOptions()
    t0 = time.monotonic()
    c = instance.objective()
    lb0, ub0 = instance.bounds()
    A = instance.dense_matrix()
    senses, b = instance.row_arrays()
    int_cols = np.nonzero(instance.integrality())[0]

    def lp(lb, ub):
        return _solve_rows(c, A, senses, b, lb, ub, opts.feas_tol, 1e-9, None)

    root = lp(lb0, ub0)
    nodes = 1
    if root.status == INFEASIBLE:
        return MipResult(status="infeasible", nodes=nodes,
                         infeasible_rows=root.infeasible_rows,
                         wall_time=time.monotonic() - t0)
    if root.status == UNBOUNDED:
        return MipResult(status="unbounded", nodes=nodes,
                         wall_time=time.monotonic() - t0)

    incumbent = None
    incumbent_obj = math.inf
    next_id = 0
    heap = [(root.objective, next_id, lb0, ub0, root.x)]
    timed_out = False

    def cutoff():
        if not math.isfinite(incumbent_obj):
            return math.inf
        return incumbent_obj - opts.mip_gap * max(1.0, abs(incumbent_obj))

    pruned_bound = math.inf
    while heap:
        bound, _, lb, ub, x = heapq.heappop(heap)
        if bound >= cutoff():
            pruned_bound = bound  # best-first: nothing better remains
            heap = []
            break
        if opts.time_limit is not None and time.monotonic() - t0 > opts.time_limit:
            timed_out = True
            heapq.heappush(heap, (bound, -1, lb, ub, x))
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            heapq.heappush(heap, (bound, -1, lb, ub, x))
            break

        frac = np.abs(x[int_cols] - np.round(x[int_cols]))
        if frac.size == 0 or frac.max() <= opts.int_tol:
            if bound < incumbent_obj - 1e-15:
                fixed = _polish(c, A, senses, b, lb, ub, int_cols, x, opts)
                if fixed is not None and fixed[1] < incumbent_obj:
                    incumbent, incumbent_obj = fixed
            continue
        j = int(int_cols[np.argmax(frac)])  # argmax -> lowest index on ties
        floor_v = math.floor(x[j] + opts.int_tol)
        for new_lb, new_ub in (
            (lb, _with(ub, j, float(floor_v))),
            (_with(lb, j, float(floor_v + 1)), ub),
        ):
            if new_lb[j] > new_ub[j]:
                continue
            child = lp(new_lb, new_ub)
            nodes += 1
            if child.status != OPTIMAL:
                continue
            if child.objective < cutoff():
                next_id += 1
                heapq.heappush(heap, (child.objective, next_id, new_lb, new_ub, child.x))

    open_bounds = [entry[0] for entry in heap]
    best_bound = min([incumbent_obj, pruned_bound] + open_bounds)
    wall = time.monotonic() - t0
    if incumbent is None:
        if timed_out or heap:
            return MipResult(status="unknown", bound=best_bound, nodes=nodes, wall_time=wall)
        return MipResult(status="infeasible", nodes=nodes, wall_time=wall)
    gap = MipResult.compute_gap(incumbent_obj, best_bound)
    status = "optimal" if gap <= opts.mip_gap else "feasible"
    return MipResult(status=status, x=incumbent, objective=incumbent_obj,
                     bound=best_bound, gap=gap, nodes=nodes, wall_time=wall)


def _with(arr, j, value):
    out = arr.copy()
    out[j] = value
    return out


def _polish(c, A, senses, b, lb, ub, int_cols, x, opts):
    """Re-solve with integers pinned to their rounded values.

    Turns an within-tolerance incumbent into an exact LP vertex so the
    independent verifier sees clean residuals.
    """
    lbf, ubf = lb.copy(), ub.copy()
    rounded = np.round(x[int_cols])
    lbf[int_cols] = rounded
    ubf[int_cols] = rounded
    sol = _solve_rows(c, A, senses, b, lbf, ubf, opts.feas_tol, 1e-9, None)
    if sol.status != OPTIMAL:
        return None
    return sol.x, sol.objective
