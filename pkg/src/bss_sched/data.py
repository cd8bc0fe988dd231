"""Domain types, unit handling and ingestion of the station's input data.

Canonical units everywhere inside the package: MW, MWh, $/MWh, hours.
Inputs given in kW/kWh are converted once at the boundary (``units: "kw"``
in the config file, or the ``kw_to_mw``/``kwh_to_mwh`` helpers).
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

MW_PER_KW = 1e-3

#: config fields holding power quantities (MW canonically)
_POWER_FIELDS = ("p_ch_max", "p_dch_max", "p_grid_max", "delta_u")
#: config fields holding energy quantities (MWh canonically)
_ENERGY_FIELDS = ("cap_max", "cap_min", "cap_init")


class DataError(ValueError):
    """Invalid input file or configuration."""


def kw_to_mw(value):
    return value * MW_PER_KW


def kwh_to_mwh(value):
    return value * MW_PER_KW


@dataclass(frozen=True)
class FeederSeries:
    """Per-period feeder data: price, aggregate load/solar/net load, swap demand.

    Arrays are indexed 0..T-1 for hours 1..T.
    """

    price: np.ndarray     # $/MWh
    load: np.ndarray      # MW
    solar: np.ndarray     # MW
    net_load: np.ndarray  # MW, load - solar
    demand: np.ndarray    # swaps handed over per hour (int)

    @property
    def horizon(self) -> int:
        return len(self.price)

    @property
    def total_swaps(self) -> int:
        return int(self.demand.sum())

    def net_load_delta(self) -> np.ndarray:
        """Period-to-period net load change, length T-1 (hours 2..T)."""
        return np.diff(self.net_load)


def make_series(price, load, solar, demand, net_load=None, tol=1e-6) -> FeederSeries:
    """Validate raw columns and build a FeederSeries.

    ``net_load`` is always recomputed as load - solar; a provided column is
    only cross-checked against the recomputation.
    """
    price = np.asarray(price, dtype=float)
    load = np.asarray(load, dtype=float)
    solar = np.asarray(solar, dtype=float)
    demand_arr = np.asarray(demand)
    n = len(price)
    if not (len(load) == len(solar) == len(demand_arr) == n):
        raise DataError(
            "series length mismatch: price=%d load=%d solar=%d demand=%d"
            % (n, len(load), len(solar), len(demand_arr))
        )
    if n == 0:
        raise DataError("empty series")
    if not np.all(np.isfinite(price)):
        raise DataError("price contains non-finite values")
    if not np.all(np.isfinite(load)) or not np.all(np.isfinite(solar)):
        raise DataError("load/solar contain non-finite values")
    if np.any(demand_arr != np.floor(np.asarray(demand_arr, dtype=float))):
        raise DataError("demand must be integer counts")
    demand_int = np.asarray(demand_arr, dtype=int)
    if np.any(demand_int < 0):
        raise DataError("demand must be nonnegative")
    computed = load - solar
    if net_load is not None:
        provided = np.asarray(net_load, dtype=float)
        if len(provided) != n:
            raise DataError("net_load column length mismatch")
        err = np.max(np.abs(provided - computed))
        if err > tol:
            raise DataError(
                "net_load column inconsistent with load - solar (max error %g MW)" % err
            )
    return FeederSeries(price=price, load=load, solar=solar,
                        net_load=computed, demand=demand_int)


def _read_csv(path, columns):
    """Read a CSV with a header, returning {column: list}, hours checked 1..T."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = [c for c in ("hour",) + columns if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        rows = list(reader)
    out = {c: [] for c in columns}
    for i, row in enumerate(rows, start=1):
        try:
            hour = int(row["hour"])
        except ValueError:
            raise DataError(f"{path}: non-numeric hour {row['hour']!r}") from None
        if hour != i:
            raise DataError(f"{path}: hours must be contiguous 1..T, got {hour} at row {i}")
        for c in columns:
            cell = row[c]
            if cell is None or cell == "":
                raise DataError(f"{path}: empty cell in column {c}, hour {i}")
            try:
                out[c].append(float(cell))
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} in column {c}") from None
    return out


def ingest_dataset(price_path, feeder_path, demand_path) -> FeederSeries:
    """Load and validate the three per-hour CSV files.

    Schemas (header row required, hours 1..T contiguous):
      prices: hour,price_usd_per_mwh
      feeder: hour,load_mw,solar_mw[,net_load_mw]
      demand: hour,swaps
    """
    prices = _read_csv(price_path, ("price_usd_per_mwh",))
    with open(feeder_path, newline="") as fh:
        has_net = "net_load_mw" in (csv.DictReader(fh).fieldnames or [])
    feeder_cols = ("load_mw", "solar_mw") + (("net_load_mw",) if has_net else ())
    feeder = _read_csv(feeder_path, feeder_cols)
    demand = _read_csv(demand_path, ("swaps",))
    return make_series(
        price=prices["price_usd_per_mwh"],
        load=feeder["load_mw"],
        solar=feeder["solar_mw"],
        net_load=feeder.get("net_load_mw"),
        demand=demand["swaps"],
    )


@dataclass(frozen=True)
class BssConfig:
    """Station fleet, battery, charger and grid parameters.

    Energies in MWh, powers in MW, tau in hours. ``init_full`` lists the
    battery ids (0-based) that are fully charged before period 1; these
    cover the period-1 swap demand. ``init_soc`` is the stored energy of
    every battery before period 1.
    """

    fleet_size: int
    horizon: int
    cap_max: float = 0.1
    cap_min: float = 0.0
    cap_init: float = 0.0
    p_ch_max: float = 0.0172
    p_dch_max: float = 0.0172
    eta_ch: float = 1.0
    eta_dch: float = 1.0
    p_grid_max: float = 5.16
    delta_u: float = 1.0
    tau: float = 1.0
    big_m: float = 1000.0
    eps: float | None = None
    init_full: tuple = ()
    init_soc: tuple = ()
    demand_relaxation: str = "eq"   # "eq" per the printed balance, "geq" optional


def minimum_initial_stock(demand, cap_max, cap_init, p_ch_max, eta_ch, tau) -> int:
    """Pre-charged batteries needed beyond the hour-1 stock.

    An empty battery is first full at the end of hour
    ceil((cap_max - cap_init) / (eta_ch * p_ch_max * tau)), so every swap
    demanded before the hour after that must be covered by batteries that
    start the day charged.  Returns that cumulative early demand.
    """
    demand = np.asarray(demand)
    rate = eta_ch * p_ch_max * tau
    if rate <= 0 or cap_max <= cap_init:
        return 0
    first_full = math.ceil((cap_max - cap_init) / rate)
    return int(np.sum(demand[1:first_full]))


def make_config(demand=None, **kwargs) -> BssConfig:
    """Build a BssConfig, filling derived defaults.

    p_grid_max defaults to fleet_size * p_ch_max (no explicit transfer
    limit, so the natural bound from the fleet sum). eps defaults to
    1 / (cap_max - cap_min), the largest value that leaves every integer
    point feasible; anything smaller keeps the same integer semantics but
    weakens the LP relaxation. init_soc defaults to cap_max for batteries
    in init_full and cap_init otherwise; when the swap demand profile is
    passed, enough further batteries start at cap_max to cover the swaps
    that fall due before a battery can first charge from empty.
    """
    fields = dict(kwargs)
    fleet = int(fields["fleet_size"])
    cap_max = float(fields.get("cap_max", 0.1))
    cap_min = float(fields.get("cap_min", 0.0))
    cap_init = float(fields.get("cap_init", 0.0))
    if fields.get("p_grid_max") is None:
        fields["p_grid_max"] = fleet * float(fields.get("p_ch_max", 0.0172))
    if fields.get("eps") is None and cap_max > cap_min:
        fields["eps"] = 1.0 / (cap_max - cap_min)
    init_full = tuple(int(b) for b in fields.get("init_full", ()))
    fields["init_full"] = init_full
    if not fields.get("init_soc"):
        charged = set(init_full)
        if demand is not None:
            stock = minimum_initial_stock(
                demand, cap_max, cap_init,
                float(fields.get("p_ch_max", 0.0172)),
                float(fields.get("eta_ch", 1.0)),
                float(fields.get("tau", 1.0)),
            )
            spare = (b for b in range(fleet) if b not in charged)
            charged.update(itertools.islice(spare, stock))
        fields["init_soc"] = tuple(
            cap_max if b in charged else cap_init for b in range(fleet)
        )
    else:
        fields["init_soc"] = tuple(float(v) for v in fields["init_soc"])
    return BssConfig(**fields)


def validate_config(cfg: BssConfig, series: FeederSeries) -> BssConfig:
    """Check all config invariants against the dataset; returns cfg unchanged."""
    errors = []
    if cfg.fleet_size < 0 or cfg.fleet_size != int(cfg.fleet_size):
        errors.append("fleet_size: must be a nonnegative integer")
    if cfg.horizon < 1:
        errors.append("horizon: must be >= 1")
    if cfg.horizon != series.horizon:
        errors.append(f"horizon: config says {cfg.horizon}, series has {series.horizon}")
    if not (0.0 <= cfg.cap_min <= cfg.cap_init <= cfg.cap_max):
        errors.append("cap_min/cap_init/cap_max: need 0 <= cap_min <= cap_init <= cap_max")
    if cfg.cap_max <= cfg.cap_min:
        errors.append("cap_max: must exceed cap_min")
    for name in ("p_ch_max", "p_dch_max", "delta_u", "tau"):
        if getattr(cfg, name) <= 0:
            errors.append(f"{name}: must be positive")
    for name in ("eta_ch", "eta_dch"):
        v = getattr(cfg, name)
        if not (0.0 < v <= 1.0):
            errors.append(f"{name}: must be in (0, 1]")
    if cfg.p_grid_max <= 0 and cfg.fleet_size > 0:
        errors.append("p_grid_max: must be positive")
    if cfg.cap_max > cfg.cap_min and cfg.big_m < 1.0 / (cfg.cap_max - cfg.cap_min):
        errors.append("big_m: must be >= 1/(cap_max - cap_min)")
    if cfg.eps is None or cfg.eps <= 0:
        errors.append("eps: eps must be positive")
    elif cfg.cap_max > cfg.cap_min and cfg.eps > 1.0 / (cfg.cap_max - cfg.cap_min) + 1e-12:
        errors.append("eps: must be <= 1/(cap_max - cap_min) or partly "
                      "charged batteries are forced to count as full")
    if cfg.demand_relaxation not in ("eq", "geq"):
        errors.append("demand_relaxation: must be 'eq' or 'geq'")
    ids = list(cfg.init_full)
    if len(set(ids)) != len(ids):
        errors.append("init_full: duplicate battery ids")
    if any(b < 0 or b >= cfg.fleet_size for b in ids):
        errors.append("init_full: battery id out of range")
    if len(cfg.init_soc) != cfg.fleet_size:
        errors.append("init_soc: must have one entry per battery")
    else:
        for b, soc in enumerate(cfg.init_soc):
            if b in set(ids):
                if abs(soc - cfg.cap_max) > 1e-12:
                    errors.append(f"init_soc[{b}]: battery in init_full must start at cap_max")
            elif not (cfg.cap_min - 1e-12 <= soc <= cfg.cap_max + 1e-12):
                errors.append(f"init_soc[{b}]: outside [cap_min, cap_max]")
    d1 = "eq" if cfg.demand_relaxation == "eq" else "geq"
    ok1 = (len(ids) == series.demand[0]) if d1 == "eq" else (len(ids) >= series.demand[0])
    if not ok1:
        errors.append(
            "init_full: infeasible initial swap stock "
            f"(|init_full|={len(ids)}, period-1 demand={series.demand[0]})"
        )
    if errors:
        raise DataError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def load_config(path, series: FeederSeries | None = None, overrides=None) -> BssConfig:
    """Load a JSON config file (keys mirror BssConfig fields).

    An optional top-level "units": "kw" marks power/energy entries as
    kW/kWh; they are converted to MW/MWh here, once. ``overrides`` is a
    dict of canonical-unit values applied after the file.
    """
    with open(path) as fh:
        raw = json.load(fh)
    units = raw.pop("units", "mw").lower()
    if units not in ("mw", "kw"):
        raise DataError(f"units: unknown value {units!r}")
    if units == "kw":
        for key in _POWER_FIELDS + _ENERGY_FIELDS:
            if raw.get(key) is not None:
                raw[key] = raw[key] * MW_PER_KW
        if raw.get("init_soc"):
            raw["init_soc"] = [v * MW_PER_KW for v in raw["init_soc"]]
    known = set(BssConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    demand = series.demand if series is not None else None
    cfg = make_config(demand=demand, **raw)
    if series is not None:
        validate_config(cfg, series)
    return cfg


def bundled_dataset() -> FeederSeries:
    """The bundled 24-hour feeder dataset (prices, load/solar, swap demand)."""
    root = resources.files(__package__) / "datasets"
    return ingest_dataset(
        str(root / "prices.csv"), str(root / "feeder.csv"), str(root / "demand.csv")
    )


def bundled_config(series: FeederSeries | None = None) -> BssConfig:
    """The bundled 300-battery station configuration."""
    root = resources.files(__package__) / "datasets"
    return load_config(str(root / "config.json"), series=series)


def scale_inputs(cfg: BssConfig, series: FeederSeries, k: float):
    """Shrink the problem by a factor k for desk-scale solves.

    Fleet size and hourly swap demand are divided by k (rounded up), the
    feeder series and the ramp cap delta_u are divided by k so the
    variability constraints stay feasible at the smaller fleet, and
    p_grid_max is re-derived from the new fleet size. Prices are untouched.
    """
    if k <= 0:
        raise DataError("scale factor must be positive")
    if k == 1:
        return cfg, series
    fleet = max(1, math.ceil(cfg.fleet_size / k))
    demand = np.ceil(series.demand / k).astype(int)
    demand = np.minimum(demand, fleet)
    scaled = make_series(
        price=series.price,
        load=series.load / k,
        solar=series.solar / k,
        demand=demand,
    )
    init_full = tuple(range(int(demand[0])))
    new_cfg = make_config(
        demand=demand,
        fleet_size=fleet,
        horizon=cfg.horizon,
        cap_max=cfg.cap_max,
        cap_min=cfg.cap_min,
        cap_init=cfg.cap_init,
        p_ch_max=cfg.p_ch_max,
        p_dch_max=cfg.p_dch_max,
        eta_ch=cfg.eta_ch,
        eta_dch=cfg.eta_dch,
        p_grid_max=None,
        delta_u=cfg.delta_u / k,
        tau=cfg.tau,
        big_m=cfg.big_m,
        eps=cfg.eps,
        init_full=init_full,
        demand_relaxation=cfg.demand_relaxation,
    )
    return validate_config(new_cfg, scaled), scaled


@dataclass
class Schedule:
    """A charge/discharge/swap plan plus the derived feeder net load.

    Battery-indexed arrays are (B, T); period arrays are (T,).
    p_feeder[t] = p_exchange[t] + net_load[t].
    """

    p_ch: np.ndarray
    p_dch: np.ndarray
    soc: np.ndarray
    full: np.ndarray
    p_exchange: np.ndarray
    p_feeder: np.ndarray

    @property
    def fleet_size(self) -> int:
        return self.p_ch.shape[0]

    @property
    def horizon(self) -> int:
        return self.p_exchange.shape[0]

    def feeder_ramps(self) -> np.ndarray:
        """P^u changes between successive periods, length T-1."""
        return np.diff(self.p_feeder)

    def to_dict(self) -> dict:
        return {
            "p_ch_mw": self.p_ch.tolist(),
            "p_dch_mw": self.p_dch.tolist(),
            "soc_mwh": self.soc.tolist(),
            "full": self.full.astype(int).tolist(),
            "p_exchange_mw": self.p_exchange.tolist(),
            "p_feeder_mw": self.p_feeder.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(
            p_ch=np.asarray(d["p_ch_mw"], dtype=float),
            p_dch=np.asarray(d["p_dch_mw"], dtype=float),
            soc=np.asarray(d["soc_mwh"], dtype=float),
            full=np.asarray(d["full"], dtype=float),
            p_exchange=np.asarray(d["p_exchange_mw"], dtype=float),
            p_feeder=np.asarray(d["p_feeder_mw"], dtype=float),
        )


def zero_schedule(cfg: BssConfig, series: FeederSeries) -> Schedule:
    B, T = cfg.fleet_size, cfg.horizon
    return Schedule(
        p_ch=np.zeros((B, T)),
        p_dch=np.zeros((B, T)),
        soc=np.zeros((B, T)),
        full=np.zeros((B, T)),
        p_exchange=np.zeros(T),
        p_feeder=series.net_load.copy(),
    )
