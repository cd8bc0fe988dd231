"""Solver-independent checking of schedules, plus a brute-force oracle.

All checks are direct arithmetic on the schedule arrays; no LP is involved
except inside the brute-force oracle, which enumerates swap-indicator
patterns and solves the remaining continuous problem for each.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .data import BssConfig, FeederSeries, Schedule
from .model import assemble_model, index_variables, schedule_from_values
from .simplex import OPTIMAL, solve_lp

VERIFY_TOL = 1e-6

FAMILIES = ("exchange", "grid", "swap-indicator", "demand",
            "soc-bounds", "soc-dynamics", "variability")


@dataclass
class Violation:
    constraint: str
    amount: float
    period: int | None = None
    battery: int | None = None

    def to_dict(self):
        return {"constraint": self.constraint, "amount": self.amount,
                "period": self.period, "battery": self.battery}


@dataclass
class VerificationReport:
    family_residuals: dict
    violations: list
    cost: float
    family_pass: dict
    passed: bool
    tol: float = VERIFY_TOL

    def to_json(self, indent=2):
        return json.dumps({
            "passed": self.passed,
            "tol": self.tol,
            "cost_usd": self.cost,
            "family_residuals": self.family_residuals,
            "family_pass": self.family_pass,
            "violations": [v.to_dict() for v in self.violations],
        }, indent=indent)


def evaluate_cost(schedule: Schedule, series: FeederSeries, tau: float) -> float:
    """Operation cost in $: sum of exchange power * price * tau.

    Negative values are net revenue for the station.
    """
    return float(np.dot(schedule.p_exchange, series.price) * tau)


def verify_schedule(schedule: Schedule, series: FeederSeries, cfg: BssConfig,
                    variability: bool = False, scenarios=(),
                    tol: float = VERIFY_TOL) -> VerificationReport:
    """Re-evaluate every constraint family of a schedule by direct arithmetic.

    ``scenarios`` is a sequence of perturbed net-load arrays; each is checked
    against the same ramp band as the nominal series (only when
    ``variability`` is on for the nominal, scenarios are always checked if
    given).
    """
    B, T = cfg.fleet_size, cfg.horizon
    if schedule.p_ch.shape != (B, T) or schedule.p_exchange.shape != (T,):
        raise ValueError(
            f"shape mismatch: schedule is {schedule.p_ch.shape}/{schedule.p_exchange.shape},"
            f" config wants ({B},{T})/({T},)"
        )
    res = {f: 0.0 for f in FAMILIES}
    viols = []

    def record(family, name, amount, t=None, b=None):
        amount = float(amount)
        res[family] = max(res[family], amount)
        if amount > tol:
            viols.append(Violation(name, amount, period=t, battery=b))

    # exchange balance
    fleet_net = schedule.p_ch.sum(axis=0) - schedule.p_dch.sum(axis=0)
    for t in range(T):
        record("exchange", f"exch_t{t + 1}",
               abs(schedule.p_exchange[t] - fleet_net[t]), t=t + 1)

    # power limits: grid line and charger ratings
    for t in range(T):
        record("grid", f"grid_t{t + 1}",
               abs(schedule.p_exchange[t]) - cfg.p_grid_max, t=t + 1)
    for b in range(B):
        for t in range(T):
            record("grid", f"p_ch_rating_b{b}_t{t + 1}",
                   max(-schedule.p_ch[b, t], schedule.p_ch[b, t] - cfg.p_ch_max),
                   t=t + 1, b=b)
            record("grid", f"p_dch_rating_b{b}_t{t + 1}",
                   max(-schedule.p_dch[b, t], schedule.p_dch[b, t] - cfg.p_dch_max),
                   t=t + 1, b=b)

    # fully-charged indicator: binary, and consistent with the stored energy
    # within the linearization band (1/big_m below cap_max counts as full)
    band = 1.0 / cfg.big_m
    for b in range(B):
        for t in range(T):
            x = schedule.full[b, t]
            record("swap-indicator", f"full_binary_b{b}_t{t + 1}",
                   abs(x - round(x)), t=t + 1, b=b)
            soc = schedule.soc[b, t]
            is_full = soc >= cfg.cap_max - band
            if round(x) == 1:
                record("swap-indicator", f"full_ub_b{b}_t{t + 1}",
                       cfg.cap_max - soc, t=t + 1, b=b)
            elif is_full:
                record("swap-indicator", f"full_lb_b{b}_t{t + 1}",
                       soc - (cfg.cap_max - band), t=t + 1, b=b)

    # swap-demand balance (t=1 against the initial stock)
    full_counts = schedule.full.sum(axis=0)
    prev = [float(len(cfg.init_full))] + [float(full_counts[t]) for t in range(T - 1)]
    for t in range(T):
        gap = prev[t] - float(series.demand[t])
        amount = abs(gap) if cfg.demand_relaxation == "eq" else max(0.0, -gap)
        record("demand", f"demand_t{t + 1}", amount, t=t + 1)

    # stored-energy window
    for b in range(B):
        for t in range(T):
            soc = schedule.soc[b, t]
            record("soc-bounds", f"soc_window_b{b}_t{t + 1}",
                   max(cfg.cap_min - soc, soc - cfg.cap_max), t=t + 1, b=b)

    # conditional stored-energy dynamics
    for b in range(B):
        for t in range(T):
            if t == 0:
                swapped = b in set(cfg.init_full)
                prev_soc = cfg.init_soc[b]
            else:
                swapped = round(schedule.full[b, t - 1]) == 1
                prev_soc = schedule.soc[b, t - 1]
            base = cfg.cap_init if swapped else prev_soc
            expect = (base + cfg.eta_ch * schedule.p_ch[b, t] * cfg.tau
                      - cfg.eta_dch * schedule.p_dch[b, t] * cfg.tau)
            record("soc-dynamics", f"soc_dyn_b{b}_t{t + 1}",
                   abs(schedule.soc[b, t] - expect), t=t + 1, b=b)

    # ramp bands
    nets = ([series.net_load] if variability else []) + [np.asarray(s, float) for s in scenarios]
    for k, net in enumerate(nets):
        label = "var" if (variability and k == 0) else f"scen{k - int(variability)}"
        for t in range(1, T):
            delta = net[t] - net[t - 1]
            ramp = schedule.p_exchange[t] - schedule.p_exchange[t - 1]
            record("variability", f"{label}_t{t + 1}",
                   max(ramp - (cfg.delta_u - delta), (-cfg.delta_u - delta) - ramp),
                   t=t + 1)

    # derived feeder consistency is definitional; flag it under exchange
    for t in range(T):
        record("exchange", f"feeder_t{t + 1}",
               abs(schedule.p_feeder[t] - (schedule.p_exchange[t] + series.net_load[t])),
               t=t + 1)

    family_pass = {f: res[f] <= tol for f in FAMILIES}
    return VerificationReport(
        family_residuals=res,
        violations=viols,
        cost=evaluate_cost(schedule, series, cfg.tau),
        family_pass=family_pass,
        passed=all(family_pass.values()),
    )


def _demand_consistent_patterns(cfg: BssConfig, series: FeederSeries):
    """All binary indicator matrices consistent with the swap balance.

    Column t-1 (hour t) must sum to demand[t+1] for t < T; the last column
    is unconstrained by demand. Under 'geq' relaxation sums may exceed
    demand.
    """
    B, T = cfg.fleet_size, cfg.horizon
    all_subsets = [tuple(s) for r in range(B + 1)
                   for s in itertools.combinations(range(B), r)]
    per_column = []
    for t in range(1, T + 1):
        if t < T:
            need = int(series.demand[t])  # demand of hour t+1
            if cfg.demand_relaxation == "eq":
                choices = [s for s in all_subsets if len(s) == need]
            else:
                choices = [s for s in all_subsets if len(s) >= need]
        else:
            choices = all_subsets
        per_column.append(choices)
    for combo in itertools.product(*per_column):
        x = np.zeros((B, T))
        for t, subset in enumerate(combo):
            for b in subset:
                x[b, t] = 1.0
        yield x


def brute_force_schedule(cfg: BssConfig, series: FeederSeries,
                         variability: bool = False):
    """Enumerate every demand-consistent indicator pattern, LP-solve the rest.

    Returns (status, cost, schedule). Exact reference for the bundled
    branch-and-bound; capped at fleet_size * horizon <= 12.
    """
    B, T = cfg.fleet_size, cfg.horizon
    if B * T > 12:
        raise ValueError(f"brute force capped at B*T <= 12, got {B}x{T}")
    instance = assemble_model(cfg, series, variability=variability)
    vmap = index_variables(cfg)
    best = None
    for x in _demand_consistent_patterns(cfg, series):
        fixed = [list(v) for v in instance.variables]
        for b in range(B):
            for t in range(1, T + 1):
                k = vmap.column("full", b, t)
                fixed[k][1] = fixed[k][2] = x[b, t - 1]
        from .model import MilpInstance, Variable
        sub = MilpInstance(
            variables=[Variable(*v) for v in fixed],
            constraints=instance.constraints,
        )
        sol = solve_lp(sub)
        if sol.status == OPTIMAL and (best is None or sol.objective < best[0] - 1e-12):
            best = (sol.objective, sol.x)
    if best is None:
        return "infeasible", None, None
    schedule = schedule_from_values(best[1], vmap, series)
    return "optimal", best[0], schedule
