"""Bounded-variable two-phase simplex for desk-scale LPs.

Dense revised simplex with an explicit basis inverse, Dantzig pricing and a
Bland's-rule fallback once degeneracy stalls progress. Deterministic: fixed
pivot rules, fixed tie-breaks (lowest column index), no randomness.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EQ, GE, LE, MilpInstance

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_AT_LB, _AT_UB, _FREE, _BASIC = 0, 1, 2, 3


class SolverError(RuntimeError):
    """Numerical failure inside the LP solver."""


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None          # structural column values
    objective: float | None = None
    duals: np.ndarray | None = None      # one multiplier per instance row
    infeasible_rows: list = field(default_factory=list)  # best-effort hint
    iterations: int = 0


def solve_lp(instance: MilpInstance, feas_tol: float = 1e-7,
             opt_tol: float = 1e-9, max_iter: int | None = None) -> LpSolution:
    """Solve the LP relaxation of an instance (integrality ignored)."""
    n = instance.n_cols
    m = instance.n_rows
    c = instance.objective()
    lb, ub = instance.bounds()
    if m == 0:
        return _solve_boxed(c, lb, ub)
    A = instance.dense_matrix()
    senses, b = instance.row_arrays()
    return _solve_rows(c, A, senses, b, lb, ub, feas_tol, opt_tol, max_iter)


def _solve_boxed(c, lb, ub) -> LpSolution:
    """No constraints: each column sits at its cheapest bound."""
    x = np.zeros_like(c)
    for j in range(len(c)):
        if c[j] > 0:
            if not np.isfinite(lb[j]):
                return LpSolution(status=UNBOUNDED)
            x[j] = lb[j]
        elif c[j] < 0:
            if not np.isfinite(ub[j]):
                return LpSolution(status=UNBOUNDED)
            x[j] = ub[j]
        else:
            x[j] = lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0)
    return LpSolution(status=OPTIMAL, x=x, objective=float(c @ x), duals=np.zeros(0))


def _solve_rows(c, A, senses, b, lb, ub, feas_tol, opt_tol, max_iter) -> LpSolution:
    """Add slack columns for inequality rows and run the bounded simplex."""
    m, n = A.shape
    slack_rows = [i for i, s in enumerate(senses) if s != EQ]
    ns = len(slack_rows)
    A_ext = np.hstack([A, np.zeros((m, ns))])
    lb_ext = np.concatenate([lb, np.zeros(ns)])
    ub_ext = np.concatenate([ub, np.full(ns, np.inf)])
    for k, i in enumerate(slack_rows):
        A_ext[i, n + k] = 1.0 if senses[i] == LE else -1.0
    c_ext = np.concatenate([c, np.zeros(ns)])
    core = _BoundedSimplex(c_ext, A_ext, b.astype(float), lb_ext, ub_ext,
                           feas_tol=feas_tol, opt_tol=opt_tol, max_iter=max_iter)
    status, x_ext, y, bad_rows, iters = core.run()
    if status != OPTIMAL:
        return LpSolution(status=status, infeasible_rows=bad_rows, iterations=iters)
    x = x_ext[:n]
    _audit(A, senses, b, lb, ub, x, tol=max(1e-6, feas_tol * 10))
    return LpSolution(status=OPTIMAL, x=x, objective=float(c @ x), duals=y,
                      iterations=iters)


def _audit(A, senses, b, lb, ub, x, tol):
    """Sanity check before reporting optimal; never returns a silent bad point."""
    bviol = float(np.max(np.maximum(lb - x, x - ub), initial=0.0))
    r = A @ x - b
    rviol = 0.0
    for i, s in enumerate(senses):
        if s == EQ:
            rviol = max(rviol, abs(r[i]))
        elif s == LE:
            rviol = max(rviol, r[i])
        else:
            rviol = max(rviol, -r[i])
    if bviol > tol or rviol > tol:
        raise SolverError(
            f"optimal point failed the feasibility audit "
            f"(bound violation {bviol:.3e}, row violation {rviol:.3e})"
        )


class _BoundedSimplex:
    """min c'x  s.t.  A x = b,  lb <= x <= ub  (bounds may be infinite)."""

    _REFACTOR_EVERY = 150
    _DEGEN_LIMIT = 40

    def __init__(self, c, A, b, lb, ub, feas_tol=1e-7, opt_tol=1e-9, max_iter=None):
        self.c = np.asarray(c, dtype=float)
        self.m, n = A.shape
        self.n = n
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iter = max_iter if max_iter is not None else 200 * (self.m + n + 10)
        self.b = b
        # nonbasic start: nearest finite bound, 0 for free columns
        x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        state = np.where(np.isfinite(lb), _AT_LB,
                         np.where(np.isfinite(ub), _AT_UB, _FREE))
        r = b - A @ x
        sgn = np.where(r >= 0.0, 1.0, -1.0)
        # artificial columns carry the initial residual; phase 1 drives them to 0
        self.A = np.hstack([A, np.diag(sgn)])
        self.lb = np.concatenate([lb, np.zeros(self.m)])
        self.ub = np.concatenate([ub, np.full(self.m, np.inf)])
        self.x = np.concatenate([x, np.abs(r)])
        self.state = np.concatenate([state, np.full(self.m, _BASIC, dtype=state.dtype)])
        self.basis = np.arange(n, n + self.m)
        self.Binv = np.diag(sgn)  # diag(sgn) is its own inverse
        self.n_art = self.m
        self.cost = None
        self.pivots_since_refactor = 0
        self.total_iters = 0

    # -- linear algebra helpers -------------------------------------------

    def _refactorize(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular basis (cond est unavailable): {exc}") from exc
        self.pivots_since_refactor = 0
        self._recompute_basics()

    def _recompute_basics(self):
        xx = self.x.copy()
        xx[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ xx)

    # -- simplex core ------------------------------------------------------

    def _iterate(self, cost):
        """Run to optimality for the given cost vector. Returns status."""
        bland = False
        degen_streak = 0
        while True:
            if self.total_iters >= self.max_iter:
                raise SolverError(f"iteration limit {self.max_iter} exceeded")
            self.total_iters += 1
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            d[self.basis] = 0.0
            elig = (
                ((self.state == _AT_LB) & (d < -self.opt_tol))
                | ((self.state == _AT_UB) & (d > self.opt_tol))
                | ((self.state == _FREE) & (np.abs(d) > self.opt_tol))
            )
            idx = np.nonzero(elig)[0]
            if idx.size == 0:
                return OPTIMAL, y
            if bland:
                j = int(idx[0])
            else:
                j = int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0
            if self.state[j] == _AT_UB or (self.state[j] == _FREE and d[j] > 0):
                direction = -1.0
            w = self.Binv @ self.A[:, j]
            num = direction * w

            # ratio test against basic bounds
            xB = self.x[self.basis]
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            t_candidates = np.full(self.m, np.inf)
            pos = num > 1e-11
            neg = num < -1e-11
            with np.errstate(invalid="ignore"):
                t_candidates[pos] = (xB[pos] - lbB[pos]) / num[pos]
                t_candidates[neg] = (xB[neg] - ubB[neg]) / num[neg]
            t_candidates = np.where(np.isnan(t_candidates), np.inf, t_candidates)
            t_candidates = np.maximum(t_candidates, 0.0)
            t_basic = np.min(t_candidates) if self.m else np.inf
            both_finite = np.isfinite(self.lb[j]) and np.isfinite(self.ub[j])
            t_flip = self.ub[j] - self.lb[j] if both_finite else np.inf
            t_star = min(t_basic, t_flip)
            if not np.isfinite(t_star):
                return UNBOUNDED, None

            if t_star <= 1e-12:
                degen_streak += 1
                if degen_streak > self._DEGEN_LIMIT:
                    bland = True
            else:
                degen_streak = 0
                bland = False

            if t_flip <= t_basic:
                # bound flip: j moves to its opposite bound, basis unchanged
                self.x[self.basis] = xB - t_flip * num
                self.x[j] = self.ub[j] if direction > 0 else self.lb[j]
                self.state[j] = _AT_UB if direction > 0 else _AT_LB
                continue

            # leaving variable: among blocking rows prefer the largest pivot
            # magnitude for stability, then the lowest variable index
            blocking = np.nonzero(t_candidates <= t_star + 1e-11)[0]
            mags = np.abs(num[blocking])
            if bland:
                safe = blocking[mags > 1e-9]
                cand = safe if safe.size else blocking
                leave = int(cand[np.argmin(self.basis[cand])])
            else:
                best = blocking[mags >= mags.max() - 1e-12]
                leave = int(best[np.argmin(self.basis[best])])
            if abs(w[leave]) < 1e-10:
                if self.pivots_since_refactor > 0:
                    self._refactorize()  # stale inverse; re-price and retry
                    continue
                raise SolverError(
                    f"no usable pivot (best magnitude {abs(w[leave]):.3e})"
                )
            leave_var = int(self.basis[leave])

            self.x[self.basis] = xB - t_star * num
            self.x[j] = self.x[j] + direction * t_star
            # snap the leaving variable to the bound it hit
            if num[leave] > 0:
                self.x[leave_var] = self.lb[leave_var]
                self.state[leave_var] = _AT_LB
            else:
                self.x[leave_var] = self.ub[leave_var]
                self.state[leave_var] = _AT_UB
            self.basis[leave] = j
            self.state[j] = _BASIC

            piv = w[leave]
            col = w.copy()
            col[leave] = 0.0
            self.Binv[leave] /= piv
            self.Binv -= np.outer(col, self.Binv[leave])
            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= self._REFACTOR_EVERY:
                self._refactorize()

    def run(self):
        n_total = self.n + self.n_art
        # phase 1: minimize total artificial mass
        phase1 = np.zeros(n_total)
        phase1[self.n:] = 1.0
        status, _ = self._iterate(phase1)
        if status != OPTIMAL:
            raise SolverError("phase-1 reported unbounded; artificial costs are bounded below")
        art_mass = float(self.x[self.n:].sum())
        if art_mass > self.feas_tol:
            bad = sorted(
                int(k - self.n) for k in range(self.n, n_total)
                if self.x[k] > self.feas_tol
            )
            return INFEASIBLE, None, None, bad, self.total_iters
        # pin artificials at zero and price with the real costs
        self.ub[self.n:] = 0.0
        phase2 = np.zeros(n_total)
        phase2[:self.n] = self.c
        status, y = self._iterate(phase2)
        if status == UNBOUNDED:
            return UNBOUNDED, None, None, [], self.total_iters
        self._refactorize()  # tighten residuals before reporting
        return OPTIMAL, self.x[:self.n].copy(), y, [], self.total_iters
