"""Uncertainty sets, exact separation, and the cutting-plane loop."""

import dataclasses

import numpy as np
import pytest

from bss_sched.bridge import solve_instance
from bss_sched.model import assemble_model, index_variables, schedule_from_values
from bss_sched.robust import (RobustError, Scenario, UncertaintySet, budget_sweep,
                              make_uncertainty_set, solve_robust, worst_case_scenario)
from bss_sched.verify import verify_schedule


def nominal_schedule(cfg, srs):
    sol = solve_instance(assemble_model(cfg, srs, variability=True))
    assert sol.status == "optimal"
    return schedule_from_values(sol.x, index_variables(cfg), srs), sol.objective


def test_set_validation():
    with pytest.raises(RobustError):
        UncertaintySet(rel_error=1.5, budget=1, support=frozenset())
    with pytest.raises(RobustError):
        UncertaintySet(rel_error=0.1, budget=-1, support=frozenset())


def test_support_is_daylight_hours(series):
    uset = make_uncertainty_set(series, budget=3)
    assert uset.support == frozenset(range(9, 21))


def test_perturbation_shifts_adjacent_ramps(series):
    # Pushing hour 13's solar up by 20% raises that hour's in-feed by 1.40 MW,
    # so the ramp into hour 13 drops by 1.40 and the ramp into hour 14 rises
    # by the same amount; all other ramps are untouched.
    uset = make_uncertainty_set(series, budget=1, rel_error=0.2)
    u = np.zeros(len(series.load))
    u[12] = 0.2
    net = uset.perturbed_net_load(series, u)
    shift = 0.2 * series.solar[12]
    assert shift == pytest.approx(1.40)
    base = np.diff(series.net_load)
    bent = np.diff(net)
    assert bent[11] - base[11] == pytest.approx(-1.40)
    assert bent[12] - base[12] == pytest.approx(+1.40)
    mask = np.ones(len(base), dtype=bool)
    mask[[11, 12]] = False
    np.testing.assert_allclose(bent[mask], base[mask])


def test_zero_rel_error_is_nominal(series):
    uset = make_uncertainty_set(series, budget=5, rel_error=0.0)
    u = np.zeros(len(series.load))
    np.testing.assert_allclose(uset.perturbed_net_load(series, u), series.net_load)


def test_separation_budget_zero_returns_nominal(tiny):
    cfg, srs = tiny
    sched, _ = nominal_schedule(cfg, srs)
    uset = make_uncertainty_set(srs, budget=0, rel_error=0.2)
    scen, violation = worst_case_scenario(sched, srs, cfg, uset)
    assert scen.active_hours == ()
    assert violation <= 0.0  # the band already holds for the nominal series


def test_separation_respects_support(tiny):
    cfg, srs = tiny
    sched, _ = nominal_schedule(cfg, srs)
    # hour 1 and 4 have no solar; no admissible scenario may touch them
    uset = make_uncertainty_set(srs, budget=4, rel_error=0.2)
    scen, _ = worst_case_scenario(sched, srs, cfg, uset)
    assert set(scen.active_hours) <= uset.support == {2, 3}


def test_separation_matches_exhaustive_search(tiny):
    cfg, srs = tiny
    sched, _ = nominal_schedule(cfg, srs)
    uset = make_uncertainty_set(srs, budget=2, rel_error=0.3)
    _, violation = worst_case_scenario(sched, srs, cfg, uset)
    # exhaustive check over the +-rel_error box vertices within the support
    import itertools
    worst = -np.inf
    for hours in ([], [1], [2], [1, 2]):
        for signs in itertools.product((-0.3, 0.3), repeat=len(hours)):
            u = np.zeros(4)
            u[hours] = signs
            feeder = uset.perturbed_net_load(srs, u) + sched.p_exchange
            worst = max(worst, np.max(np.abs(np.diff(feeder)) - cfg.delta_u))
    assert violation == pytest.approx(worst, abs=1e-12)


def test_solve_robust_budget_zero_equals_deterministic(tiny):
    cfg, srs = tiny
    _, det_cost = nominal_schedule(cfg, srs)
    uset = make_uncertainty_set(srs, budget=0, rel_error=0.2)
    res = solve_robust(cfg, srs, uset)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(det_cost, abs=1e-6)
    assert res.iterations == 1 and not res.scenarios


def spiky_station():
    """Tiny station where robust corrections cost money.

    Hour-4 price is negative, so the station wants to charge hard then; the
    ramp band under solar error forces it to back off.
    """
    from bss_sched.data import make_config, make_series, validate_config

    srs = make_series(price=[10.0, 50.0, 30.0, -40.0], load=[1.0, 1.0, 2.0, 2.0],
                      solar=[0.0, 0.5, 1.0, 0.0], demand=[1, 0, 1, 0])
    cfg = make_config(demand=srs.demand, fleet_size=2, horizon=4, cap_max=0.1,
                      p_ch_max=0.06, p_dch_max=0.06, delta_u=1.2, init_full=(0,))
    return validate_config(cfg, srs), srs


def test_solve_robust_hardens_schedule():
    cfg, srs = spiky_station()
    uset = make_uncertainty_set(srs, budget=2, rel_error=0.1)
    res = solve_robust(cfg, srs, uset)
    assert res.status == "optimal"
    assert res.scenarios  # the nominal optimum needed at least one cut
    _, violation = worst_case_scenario(res.schedule, srs, cfg, uset)
    assert violation <= 1e-6
    nets = [uset.perturbed_net_load(srs, np.array(s.u)) for s in res.scenarios]
    assert verify_schedule(res.schedule, srs, cfg, variability=True,
                           scenarios=nets).passed


def test_budget_sweep_monotone_and_saturating():
    cfg, srs = spiky_station()
    sweep = budget_sweep(cfg, srs, budgets=(0, 1, 2, 3, 4), rel_error=0.1)
    costs = [sweep[b].objective for b in (0, 1, 2, 3, 4)]
    assert all(c is not None for c in costs)
    assert costs[1] > costs[0] + 1e-6  # the budget actually bites
    for lo, hi in zip(costs, costs[1:]):
        assert hi >= lo - 1e-9
    assert costs[3] == costs[2] and costs[4] == costs[2]  # reuse: exact equality
    assert sweep[3] is sweep[2] and sweep[4] is sweep[2]


def test_infeasible_budget_names_blocking_scenario():
    cfg, srs = spiky_station()
    cfg = dataclasses.replace(cfg, delta_u=0.9)
    uset = make_uncertainty_set(srs, budget=2, rel_error=0.15)
    res = solve_robust(cfg, srs, uset)
    assert res.status == "infeasible"
    assert res.schedule is None


def test_scenario_rows_flatten(tiny):
    scen = Scenario(u=(0.0, 0.2, -0.2, 0.0))
    assert scen.active_hours == (2, 3)
