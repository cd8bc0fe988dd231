"""Instance construction: variable map, row counts, coefficients."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bss_sched.data import make_config, make_series, validate_config
from bss_sched.model import (ModelError, assemble_model, build_variability_constraints,
                             index_variables, schedule_from_values)


def expected_rows(B, T, variability):
    # exchange T + indicator 2BT + demand (T-1) + dynamics 4BT (+ band 2(T-1))
    return 6 * B * T + 2 * T - 1 + (2 * (T - 1) if variability else 0)


def toy_station(B, T):
    srs = make_series(price=np.full(T, 10.0), load=np.full(T, 1.0),
                      solar=np.zeros(T), demand=np.zeros(T, dtype=int))
    cfg = make_config(demand=srs.demand, fleet_size=B, horizon=T)
    return validate_config(cfg, srs), srs


def test_counts_full_station(series, config):
    inst = assemble_model(config, series, variability=False)
    assert (inst.n_rows, inst.n_cols) == (43247, 28824)
    inst = assemble_model(config, series, variability=True)
    assert (inst.n_rows, inst.n_cols) == (43293, 28824)


@settings(max_examples=25, deadline=None)
@given(B=st.integers(1, 6), T=st.integers(2, 8), var=st.booleans())
def test_counts_formula_property(B, T, var):
    cfg, srs = toy_station(B, T)
    inst = assemble_model(cfg, srs, variability=var)
    assert inst.n_rows == expected_rows(B, T, var)
    assert inst.n_cols == 4 * B * T + T


def test_variable_map_is_a_bijection():
    vmap = index_variables(make_config(fleet_size=3, horizon=5))
    seen = set()
    for role in ("p_ch", "p_dch", "soc", "full"):
        for b in range(3):
            for t in range(1, 6):
                seen.add(vmap.column(role, b, t))
    for t in range(1, 6):
        seen.add(vmap.column("p_exchange", None, t))
    assert seen == set(range(4 * 3 * 5 + 5))


def test_objective_is_price_on_exchange_only(tiny):
    cfg, srs = tiny
    inst = assemble_model(cfg, srs)
    vmap = index_variables(cfg)
    c = inst.objective()
    for t in range(1, 5):
        assert c[vmap.column("p_exchange", None, t)] == pytest.approx(
            srs.price[t - 1] * cfg.tau)
    assert np.count_nonzero(c) == np.count_nonzero(srs.price)


def test_objective_scales_with_tau():
    srs = make_series(price=[100.0, 100.0], load=[1.0, 1.0],
                      solar=[0.0, 0.0], demand=[0, 0])
    cfg = make_config(demand=srs.demand, fleet_size=1, horizon=2, tau=0.5)
    inst = assemble_model(validate_config(cfg, srs), srs)
    vmap = index_variables(cfg)
    assert inst.objective()[vmap.column("p_exchange", None, 1)] == pytest.approx(50.0)


def test_demand_rows_start_at_period_two(tiny):
    cfg, srs = tiny
    inst = assemble_model(cfg, srs)
    names = [r.name for r in inst.constraints]
    assert "demand_t1" not in names
    assert {f"demand_t{t}" for t in range(2, 5)} <= set(names)


def test_variability_band_rhs(series, config):
    vmap = index_variables(config)
    rows = build_variability_constraints(config, series.net_load, vmap)
    by_name = {r.name: r for r in rows}
    delta_10 = series.net_load[9] - series.net_load[8]
    assert by_name["var_ub_t10"].rhs == pytest.approx(config.delta_u - delta_10)
    assert by_name["var_lb_t10"].rhs == pytest.approx(-config.delta_u - delta_10)
    assert len(rows) == 2 * (config.horizon - 1)


def test_variability_rejects_wrong_length(config):
    vmap = index_variables(config)
    with pytest.raises(ModelError):
        build_variability_constraints(config, np.zeros(5), vmap)


def test_extra_scenarios_add_labelled_rows(tiny):
    cfg, srs = tiny
    bent = srs.net_load + 0.1
    inst = assemble_model(cfg, srs, variability=True, extra_scenarios=[bent])
    names = [r.name for r in inst.constraints]
    assert any(n.startswith("scen0_") for n in names)
    assert inst.n_rows == expected_rows(2, 4, True) + 2 * 3


def test_dynamics_identity_coefficients(tiny):
    cfg, srs = tiny
    inst = assemble_model(cfg, srs)
    vmap = index_variables(cfg)
    row = next(r for r in inst.constraints if r.name == "hold_ub_b1_t2")
    coef = dict(zip(row.cols, row.coefs))
    assert coef[vmap.column("soc", 1, 2)] == 1.0
    assert coef[vmap.column("soc", 1, 1)] == -1.0
    assert coef[vmap.column("p_ch", 1, 2)] == pytest.approx(-cfg.eta_ch * cfg.tau)
    assert coef[vmap.column("full", 1, 1)] == pytest.approx(cfg.cap_max - cfg.cap_init)
    assert row.rhs == 0.0


def test_schedule_from_values_shapes(tiny):
    cfg, srs = tiny
    vmap = index_variables(cfg)
    x = np.zeros(4 * 2 * 4 + 4)
    sched = schedule_from_values(x, vmap, srs)
    assert sched.p_ch.shape == (2, 4)
    np.testing.assert_array_equal(sched.p_feeder, srs.net_load)
