"""Scheduling toolkit for a grid-connected battery swapping station.

The package builds a mixed-integer linear program for a station that
charges, discharges and swaps a fleet of identical batteries against
hourly electricity prices, optionally holding the distribution feeder's
net-load ramp inside a band and hedging that band against solar forecast
error with a budgeted uncertainty set.

Layout: :mod:`bss_sched.data` owns types and ingestion,
:mod:`bss_sched.model` builds the solver-agnostic instance,
:mod:`bss_sched.simplex`/:mod:`bss_sched.bnb` are the bundled exact
solvers, :mod:`bss_sched.bridge` routes large instances to HiGHS,
:mod:`bss_sched.mps` round-trips fixed-format MPS,
:mod:`bss_sched.robust` runs the cutting-plane loop,
:mod:`bss_sched.verify` re-checks schedules independently, and
:mod:`bss_sched.cli` ties it together as the ``bss-sched`` command.
"""

from .bnb import MipOptions, MipResult, solve_milp
from .bridge import solve_instance, solve_with_highs
from .data import (BssConfig, DataError, FeederSeries, Schedule, ingest_dataset,
                   load_config, make_config, make_series, bundled_config,
                   bundled_dataset, scale_inputs)
from .model import MilpInstance, assemble_model, index_variables, schedule_from_values
from .mps import export_legend, export_mps, import_solution, parse_mps
from .robust import (RobustResult, Scenario, UncertaintySet, budget_sweep,
                     make_uncertainty_set, solve_robust, worst_case_scenario)
from .simplex import LpSolution, solve_lp
from .verify import (VerificationReport, brute_force_schedule, evaluate_cost,
                     verify_schedule)

__version__ = "0.1.0"

__all__ = [
    "BssConfig", "DataError", "FeederSeries", "LpSolution", "MilpInstance",
    "MipOptions", "MipResult", "RobustResult", "Scenario", "Schedule",
    "UncertaintySet", "VerificationReport", "assemble_model",
    "brute_force_schedule", "budget_sweep", "evaluate_cost", "export_legend",
    "export_mps", "import_solution", "index_variables", "ingest_dataset",
    "load_config", "make_config", "make_series", "make_uncertainty_set",
    "bundled_config", "bundled_dataset", "parse_mps", "scale_inputs",
    "schedule_from_values", "solve_instance", "solve_lp", "solve_milp",
    "solve_robust", "solve_with_highs", "verify_schedule",
    "worst_case_scenario", "__version__",
]
