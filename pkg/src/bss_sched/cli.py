"""Command-line front end: run the case studies, export MPS, verify schedules.

Case 1 schedules the station for pure price arbitrage, Case 2 adds the
feeder ramp bands, Case 3 sweeps the robust budget.  Every schedule is
re-checked by the independent verifier before anything is written; a
verification failure aborts with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bnb import MipOptions
from .bridge import solve_instance
from .data import (BssConfig, DataError, FeederSeries, Schedule, ingest_dataset,
                   load_config, bundled_config, bundled_dataset, scale_inputs)
from .model import assemble_model, index_variables, schedule_from_values
from .mps import export_legend, export_mps
from .robust import budget_sweep
from .verify import verify_schedule

DEFAULT_BUDGETS = (0, 3, 6, 9, 12)

#: row-name prefix -> constraint family, for infeasibility diagnoses
_ROW_FAMILY = (
    ("exch", "exchange"),
    ("demand", "demand"),
    ("full", "swap-indicator"),
    ("swap", "soc-dynamics"),
    ("hold", "soc-dynamics"),
    ("var", "variability"),
    ("scen", "variability"),
    ("sym", "symmetry"),
)


class CliError(Exception):
    """Fatal condition reported to the user without a traceback."""


def _family_of(row_name: str) -> str:
    for prefix, family in _ROW_FAMILY:
        if row_name.startswith(prefix):
            return family
    return "unknown"


def diagnose_infeasibility(instance) -> str:
    """Name the first constraint family whose removal restores feasibility.

    Relaxes one family at a time in the LP relaxation; the first family
    that unblocks the model is the most useful place to look for bad
    input data.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    lb, ub = instance.bounds()
    lo, hi = [], []
    for row in instance.constraints:
        lo.append(row.rhs if row.sense in ("=", ">=") else -np.inf)
        hi.append(row.rhs if row.sense in ("=", "<=") else np.inf)
    lo, hi = np.array(lo), np.array(hi)
    names = [row.name for row in instance.constraints]
    A = instance.sparse_matrix()
    seen = []
    for family in ("demand", "variability", "swap-indicator", "soc-dynamics",
                   "exchange", "symmetry"):
        mask = np.array([_family_of(n) == family for n in names])
        if not mask.any():
            continue
        seen.append(family)
        res = milp(np.zeros(len(lb)),
                   constraints=LinearConstraint(A, np.where(mask, -np.inf, lo),
                                                np.where(mask, np.inf, hi)),
                   bounds=Bounds(lb, ub))
        if res.status != 2:
            return family
    return " + ".join(seen) if seen else "variable bounds"


@dataclasses.dataclass
class CaseReport:
    """Everything a case run produces, ready for JSON serialization."""

    case: int
    status: str
    cost_usd: float
    max_feeder_ramp_mw: float
    hours: list
    p_exchange_mw: list
    p_feeder_mw: list
    net_load_mw: list
    delta_mw: list
    ramp_violations: list          # hours t with |P^u_t - P^u_{t-1}| > delta_u
    solver: dict
    scale: float = 1.0
    budget_table: list = dataclasses.field(default_factory=list)

    def to_json(self, indent=2) -> str:
        payload = dataclasses.asdict(self)
        payload["cost_usd"] = round(self.cost_usd, 2)
        for row in payload["budget_table"]:
            row["cost_usd"] = round(row["cost_usd"], 2)
        return json.dumps(payload, indent=indent)


def _report_from_schedule(case, schedule, series, cfg, result, scale) -> CaseReport:
    ramps = schedule.feeder_ramps()
    report = CaseReport(
        case=case,
        status=result.status,
        cost_usd=float(np.dot(schedule.p_exchange, series.price) * cfg.tau),
        max_feeder_ramp_mw=float(np.max(np.abs(ramps))) if len(ramps) else 0.0,
        hours=list(range(1, cfg.horizon + 1)),
        p_exchange_mw=schedule.p_exchange.tolist(),
        p_feeder_mw=schedule.p_feeder.tolist(),
        net_load_mw=series.net_load.tolist(),
        delta_mw=np.diff(series.net_load).tolist(),
        ramp_violations=[t + 2 for t, r in enumerate(ramps) if abs(r) > cfg.delta_u],
        solver={
            "status": result.status,
            "gap": result.gap if np.isfinite(result.gap) else None,
            "nodes": result.nodes,
            "wall_time_s": round(result.wall_time, 1),
        },
        scale=scale,
    )
    return report


def run_case(case: int, series: FeederSeries, cfg: BssConfig, budgets=None,
             rel_error: float = 0.2, backend: str = "auto",
             options: MipOptions | None = None, scale: float = 1.0):
    """Solve one case and return (CaseReport, verified Schedule).

    Raises CliError when the model is infeasible or the verifier rejects
    the solver's schedule.
    """
    vmap = index_variables(cfg)
    if case in (1, 2):
        variability = case == 2
        instance = assemble_model(cfg, series, variability=variability)
        result = solve_instance(instance, backend=backend, options=options)
        if result.x is None:
            if result.status == "infeasible":
                family = diagnose_infeasibility(instance)
                raise CliError(f"case {case} model is infeasible; the first "
                               f"blocking constraint family is '{family}'")
            raise CliError(f"case {case} solve ended without a schedule "
                           f"(status: {result.status})")
        schedule = schedule_from_values(result.x, vmap, series)
        verdict = verify_schedule(schedule, series, cfg, variability=variability)
        if not verdict.passed:
            worst = verdict.violations[0]
            raise CliError(f"case {case} schedule failed verification: "
                           f"{worst.constraint} off by {worst.amount:.3g}")
        report = _report_from_schedule(case, schedule, series, cfg, result, scale)
        report.cost_usd = verdict.cost
        return report, schedule

    if case != 3:
        raise CliError(f"unknown case {case}")
    budgets = DEFAULT_BUDGETS if budgets is None else tuple(budgets)
    sweep = budget_sweep(cfg, series, budgets, rel_error=rel_error,
                         backend=backend, options=options)
    table, last = [], None
    for budget in sorted(sweep):
        run = sweep[budget]
        if run.schedule is None:
            if run.status == "infeasible" and run.blocking_scenario is not None:
                scen = run.blocking_scenario
                hours = ", ".join(f"hour {t}: {u:+.0%}" for t, u in
                                  zip(scen.active_hours,
                                      (v for v in scen.u if v != 0.0)))
                raise CliError(
                    f"case 3 budget {budget}: the robust master became "
                    f"infeasible after guarding against the scenario ({hours});"
                    " the deviation band is wider than the ramp limit can"
                    " absorb -- lower --rel-error or raise delta_u")
            raise CliError(f"case 3 budget {budget} did not converge "
                           f"(status: {run.status})")
        nets = [np.asarray(s.u) for s in run.scenarios]
        scen_nets = [series.load - series.solar * (1.0 + u) for u in nets]
        verdict = verify_schedule(run.schedule, series, cfg, variability=True,
                                  scenarios=scen_nets)
        if not verdict.passed:
            worst = verdict.violations[0]
            raise CliError(f"case 3 budget {budget} schedule failed verification: "
                           f"{worst.constraint} off by {worst.amount:.3g}")
        table.append({"budget": budget, "cost_usd": verdict.cost,
                      "iterations": run.iterations, "cuts": len(run.scenarios)})
        last = (run, verdict.cost)
    run, cost = last
    report = _report_from_schedule(3, run.schedule, series, cfg, run.solver, scale)
    report.cost_usd = cost
    report.budget_table = table
    return report, run.schedule


def emit_plot_data(report: CaseReport, out_dir: Path) -> list:
    """Write fig2.csv (always) and fig3.csv (when cases 1 and 2 both ran).

    fig3 compares the feeder net load of Case 1 and Case 2, so it needs
    both sibling reports in ``out_dir``; otherwise it is skipped with a
    note on stderr.
    """
    written = []
    fig2 = out_dir / "fig2.csv"
    lines = ["hour,p_exchange_mw,p_feeder_mw"]
    for h, pm, pu in zip(report.hours, report.p_exchange_mw, report.p_feeder_mw):
        lines.append(f"{h},{pm:.6f},{pu:.6f}")
    fig2.write_text("\n".join(lines) + "\n")
    written.append(fig2)

    feeders = {}
    for case in (1, 2):
        path = out_dir / f"case{case}_report.json"
        if path.exists():
            feeders[case] = json.loads(path.read_text())["p_feeder_mw"]
    if len(feeders) == 2:
        fig3 = out_dir / "fig3.csv"
        lines = ["hour,p_feeder_case1_mw,p_feeder_case2_mw"]
        for h, (a, b) in enumerate(zip(feeders[1], feeders[2]), start=1):
            lines.append(f"{h},{a:.6f},{b:.6f}")
        fig3.write_text("\n".join(lines) + "\n")
        written.append(fig3)
    else:
        print("note: fig3.csv skipped (needs case 1 and case 2 reports)",
              file=sys.stderr)
    return written


def _load_inputs(args):
    """Dataset and config from flags, falling back to the bundled files."""
    if args.prices or args.feeder or args.demand:
        if not (args.prices and args.feeder and args.demand):
            raise CliError("--prices, --feeder and --demand must be given together")
        series = ingest_dataset(args.prices, args.feeder, args.demand)
    else:
        series = bundled_dataset()
    cfg = load_config(args.config, series=series) if args.config else bundled_config(series)
    scale = getattr(args, "scale", 1.0) or 1.0
    if scale != 1.0:
        cfg, series = scale_inputs(cfg, series, scale)
    return series, cfg, scale


def _mip_options(args) -> MipOptions:
    return MipOptions(mip_gap=args.gap, time_limit=args.time_limit)


def _cmd_run(args) -> int:
    series, cfg, scale = _load_inputs(args)
    budgets = None
    if args.budget:
        budgets = [int(tok) for tok in args.budget.split(",") if tok.strip()]
    report, schedule = run_case(args.case, series, cfg, budgets=budgets,
                                rel_error=args.rel_error, backend=args.solver,
                                options=_mip_options(args), scale=scale)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"case{args.case}_report.json"
    report_path.write_text(report.to_json() + "\n")
    schedule_path = out_dir / f"case{args.case}_schedule.json"
    schedule_path.write_text(json.dumps({
        "case": args.case,
        "variability": args.case != 1,
        "schedule": schedule.to_dict(),
    }, indent=2) + "\n")
    files = [report_path, schedule_path] + emit_plot_data(report, out_dir)
    print(f"case {args.case}: cost ${report.cost_usd:,.2f}, "
          f"max feeder ramp {report.max_feeder_ramp_mw:.3f} MW/h "
          f"({report.solver['status']})")
    for row in report.budget_table:
        print(f"  budget {row['budget']:>2}: cost ${row['cost_usd']:,.2f} "
              f"({row['cuts']} cuts)")
    for path in files:
        print(f"wrote {path}")
    return 0


def _cmd_export(args) -> int:
    series, cfg, _ = _load_inputs(args)
    instance = assemble_model(cfg, series, variability=args.case != 1)
    mps_path = Path(args.mps)
    mps_path.parent.mkdir(parents=True, exist_ok=True)
    mps_path.write_text(export_mps(instance))
    legend_path = mps_path.with_suffix(mps_path.suffix + ".legend")
    legend_path.write_text(export_legend(instance))
    print(f"wrote {mps_path} ({instance.n_rows} rows, {instance.n_cols} columns)")
    print(f"wrote {legend_path}")
    return 0


def _cmd_verify(args) -> int:
    series, cfg, _ = _load_inputs(args)
    payload = json.loads(Path(args.schedule).read_text())
    schedule = Schedule.from_dict(payload.get("schedule", payload))
    variability = bool(payload.get("variability", args.case == 2))
    verdict = verify_schedule(schedule, series, cfg, variability=variability)
    print(verdict.to_json())
    return 0 if verdict.passed else 1


def _add_data_flags(parser, with_scale=True):
    parser.add_argument("--prices", help="prices CSV (hour,price_usd_per_mwh)")
    parser.add_argument("--feeder", help="feeder CSV (hour,load_mw,solar_mw[,net_load_mw])")
    parser.add_argument("--demand", help="swap demand CSV (hour,swaps)")
    parser.add_argument("--config", help="station config JSON (defaults to bundled)")
    if with_scale:
        parser.add_argument("--scale", type=float, default=1.0,
                            help="divide fleet, demand and feeder by this factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bss-sched",
        description="Battery swapping station scheduling: case runs, MPS export,"
                    " independent schedule verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one case and write reports")
    run.add_argument("--case", type=int, required=True, choices=(1, 2, 3))
    _add_data_flags(run)
    run.add_argument("--budget", help="comma-separated budgets for case 3 "
                     "(default 0,3,6,9,12)")
    run.add_argument("--rel-error", type=float, default=0.2,
                     help="relative solar forecast error for case 3")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--solver", default="auto", choices=("auto", "bundled", "highs"))
    run.add_argument("--gap", type=float, default=1e-6, help="relative MIP gap")
    run.add_argument("--time-limit", type=float, default=None,
                     help="per-solve wall clock limit in seconds")
    run.set_defaults(func=_cmd_run)

    export = sub.add_parser("export", help="write the case model as fixed MPS")
    export.add_argument("--case", type=int, required=True, choices=(1, 2, 3))
    _add_data_flags(export)
    export.add_argument("--mps", required=True, help="output MPS path")
    export.set_defaults(func=_cmd_export)

    verify_p = sub.add_parser("verify", help="re-check a schedule file")
    verify_p.add_argument("--schedule", required=True, help="schedule JSON path")
    verify_p.add_argument("--case", type=int, default=2, choices=(1, 2, 3),
                          help="assumed case when the file lacks a marker")
    _add_data_flags(verify_p)
    verify_p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
