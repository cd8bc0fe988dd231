"""Shared fixtures: bundled dataset, desk-scale variants, a tiny station."""

import numpy as np
import pytest

from bss_sched.data import (make_config, make_series, bundled_config, bundled_dataset,
                            scale_inputs, validate_config)


@pytest.fixture(scope="session")
def series():
    return bundled_dataset()


@pytest.fixture(scope="session")
def config(series):
    return bundled_config(series)


@pytest.fixture(scope="session")
def desk(series, config):
    """Fleet-10 version of the bundled case (scale 30)."""
    cfg, scaled = scale_inputs(config, series, 30)
    return cfg, scaled


@pytest.fixture()
def tiny():
    """Two batteries, four hours; small enough for the bundled solver."""
    srs = make_series(
        price=[10.0, 50.0, 30.0, 80.0],
        load=[1.0, 1.0, 2.0, 2.0],
        solar=[0.0, 0.5, 1.0, 0.0],
        demand=[1, 0, 1, 0],
    )
    cfg = make_config(
        demand=srs.demand,
        fleet_size=2,
        horizon=4,
        cap_max=0.1,
        p_ch_max=0.06,
        p_dch_max=0.06,
        delta_u=2.0,
        init_full=(0,),
    )
    return validate_config(cfg, srs), srs


def random_station(rng, max_fleet=2, max_horizon=4):
    """A random small station or None when the draw is invalid."""
    B = int(rng.integers(1, max_fleet + 1))
    T = int(rng.integers(2, max_horizon + 1))
    srs = make_series(
        price=rng.uniform(-20.0, 120.0, T),
        load=rng.uniform(0.0, 3.0, T),
        solar=rng.uniform(0.0, 2.0, T),
        demand=rng.integers(0, B + 1, T),
    )
    cfg = make_config(
        demand=srs.demand,
        fleet_size=B,
        horizon=T,
        cap_max=0.1,
        p_ch_max=float(rng.uniform(0.03, 0.12)),
        init_full=tuple(range(int(srs.demand[0]))),
        delta_u=float(rng.uniform(0.5, 2.0)),
    )
    try:
        return validate_config(cfg, srs), srs
    except Exception:
        return None
