"""Branch-and-bound on small MILPs, cross-checked against scipy's HiGHS."""

import numpy as np
import pytest

from bss_sched.bnb import MipOptions, solve_milp
from bss_sched.bridge import solve_instance, solve_with_highs
from bss_sched.model import MilpInstance, Row, Variable, assemble_model


def mip(variables, rows):
    return MilpInstance(
        variables=[Variable(f"x{i}", lb, ub, isint, obj)
                   for i, (lb, ub, isint, obj) in enumerate(variables)],
        constraints=[Row(f"r{i}", cols, coefs, sense, rhs)
                     for i, (cols, coefs, sense, rhs) in enumerate(rows)],
    ).validate()


def test_knapsack():
    # max 10x0 + 13x1 + 7x2 s.t. 3x0 + 4x1 + 2x2 <= 6, binary
    sol = solve_milp(mip(
        [(0, 1, True, -10.0), (0, 1, True, -13.0), (0, 1, True, -7.0)],
        [((0, 1, 2), (3.0, 4.0, 2.0), "<=", 6.0)],
    ))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-20.0)
    np.testing.assert_allclose(sol.x, [0.0, 1.0, 1.0], atol=1e-6)


def test_mixed_integer_with_continuous_tail():
    # Branching on x0 forces the continuous x1 to pick up the slack.
    sol = solve_milp(mip(
        [(0, 3, True, 1.0), (0.0, 10.0, False, 2.0)],
        [((0, 1), (1.0, 1.0), ">=", 2.5)],
    ))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0)  # x0 = 2 (int), x1 = 0.5


def test_infeasible_integer_restriction():
    # LP relaxation feasible (x = 0.5) but no integer point in [0.4, 0.6].
    sol = solve_milp(mip(
        [(0, 1, True, 1.0)],
        [((0,), (1.0,), ">=", 0.4), ((0,), (1.0,), "<=", 0.6)],
    ))
    assert sol.status == "infeasible"


def test_gap_and_bound_reported():
    sol = solve_milp(mip(
        [(0, 1, True, -1.0), (0, 1, True, -1.0)],
        [((0, 1), (1.0, 1.0), "<=", 1.0)],
    ))
    assert sol.gap <= 1e-6
    assert sol.bound == pytest.approx(sol.objective, abs=1e-6)


def test_node_limit_yields_bound():
    rng = np.random.default_rng(3)
    n = 14
    w = rng.uniform(1.0, 5.0, n)
    v = rng.uniform(1.0, 9.0, n)
    inst = mip([(0, 1, True, -v[i]) for i in range(n)],
               [(tuple(range(n)), tuple(w), "<=", 0.4 * w.sum())])
    sol = solve_milp(inst, MipOptions(node_limit=3))
    assert sol.status in ("feasible", "unknown")
    assert sol.bound <= (sol.objective if sol.objective is not None else np.inf)


def test_matches_highs_on_tiny_station(tiny):
    cfg, srs = tiny
    inst = assemble_model(cfg, srs, variability=True)
    mine = solve_milp(inst)
    ref = solve_with_highs(inst)
    assert mine.status == ref.status == "optimal"
    assert mine.objective == pytest.approx(ref.objective, abs=1e-6)


def test_auto_backend_dispatch(tiny):
    cfg, srs = tiny
    inst = assemble_model(cfg, srs)  # 8 binaries -> bundled path
    sol = solve_instance(inst, backend="auto")
    assert sol.status == "optimal"
    with pytest.raises(ValueError):
        solve_instance(inst, backend="cplex")
