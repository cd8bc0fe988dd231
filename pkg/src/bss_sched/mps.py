"""Fixed-format MPS export/import and external-solution ingestion.

The writer emits ROWS/COLUMNS/RHS/RANGES/BOUNDS with INTORG/INTEND markers
and names at most 8 characters long; the objective row is named COST. Every
column carries an explicit objective entry (possibly 0) so parse-back sees
every variable, and bounds are always written explicitly. Export is
deterministic and export -> parse -> export is byte-identical.
"""
from __future__ import annotations

import re

import numpy as np

from .data import FeederSeries
from .model import EQ, GE, LE, MilpInstance, Row, Variable, VariableMap

_OBJ = "COST"
_SENSE_TO_TYPE = {LE: "L", GE: "G", EQ: "E"}
_TYPE_TO_SENSE = {v: k for k, v in _SENSE_TO_TYPE.items()}
_MARKER_ORG = "    MARKER                 'MARKER'                 'INTORG'"
_MARKER_END = "    MARKER                 'MARKER'                 'INTEND'"


class MpsError(ValueError):
    """Malformed MPS or solution file."""


def _fmt(v: float) -> str:
    if not np.isfinite(v):
        raise MpsError(f"unrepresentable value {v}")
    return repr(float(v))


def shorten_names(names) -> list:
    """Deterministic <=8 character names: sanitize, truncate, suffix-dedupe."""
    out = []
    used = set()
    next_k = {}
    for nm in names:
        s = re.sub(r"[^A-Za-z0-9]", "", nm)[:8] or "X"
        if s in used:
            base, k = s, next_k.get(s, 1)
            while True:
                cand = base[: 8 - len(str(k))] + str(k)
                if cand not in used:
                    next_k[base] = k + 1
                    s = cand
                    break
                k += 1
        used.add(s)
        out.append(s)
    return out


def export_legend(instance: MilpInstance) -> str:
    """Two-column text mapping short MPS names back to instance names."""
    shorts = shorten_names([v.name for v in instance.variables])
    lines = ["# short_name original_name"]
    lines += [f"{s} {v.name}" for s, v in zip(shorts, instance.variables)]
    return "\n".join(lines) + "\n"


def export_mps(instance: MilpInstance, name: str = "BSSMODEL") -> str:
    """Serialize an instance as fixed-format MPS text."""
    col_names = shorten_names([v.name for v in instance.variables])
    row_names = shorten_names([r.name for r in instance.constraints])

    lines = [f"NAME          {name}"]
    lines.append("ROWS")
    lines.append(f" N  {_OBJ}")
    for r, rn in zip(instance.constraints, row_names):
        lines.append(f" {_SENSE_TO_TYPE[r.sense]}  {rn}")

    # column -> [(row index, coefficient)] in row order
    entries = [[] for _ in range(instance.n_cols)]
    for i, r in enumerate(instance.constraints):
        for c, a in zip(r.cols, r.coefs):
            entries[c].append((i, a))

    lines.append("COLUMNS")
    in_int = False
    for k, v in enumerate(instance.variables):
        if v.is_integer and not in_int:
            lines.append(_MARKER_ORG)
            in_int = True
        elif not v.is_integer and in_int:
            lines.append(_MARKER_END)
            in_int = False
        cn = col_names[k]
        lines.append(f"    {cn:<10}{_OBJ:<10}{_fmt(v.obj)}")
        for i, a in entries[k]:
            lines.append(f"    {cn:<10}{row_names[i]:<10}{_fmt(a)}")
    if in_int:
        lines.append(_MARKER_END)

    lines.append("RHS")
    for r, rn in zip(instance.constraints, row_names):
        if r.rhs != 0.0:
            lines.append(f"    RHS       {rn:<10}{_fmt(r.rhs)}")

    lines.append("RANGES")  # none generated; two-sided rows are emitted as pairs

    lines.append("BOUNDS")
    for k, v in enumerate(instance.variables):
        cn = col_names[k]
        if v.lb == v.ub:
            lines.append(f" FX BND       {cn:<10}{_fmt(v.lb)}")
            continue
        lo = ("LI" if v.is_integer else "LO") if np.isfinite(v.lb) else "MI"
        lines.append((f" {lo} BND       {cn:<10}"
                      + (_fmt(v.lb) if np.isfinite(v.lb) else "")).rstrip())
        hi = ("UI" if v.is_integer else "UP") if np.isfinite(v.ub) else "PL"
        lines.append((f" {hi} BND       {cn:<10}"
                      + (_fmt(v.ub) if np.isfinite(v.ub) else "")).rstrip())

    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def parse_mps(text: str) -> MilpInstance:
    """Rebuild a MilpInstance from MPS text produced by export_mps.

    Also accepts the common fixed-format layout from other writers as long
    as one N row is present and names are whitespace-delimited.
    """
    section = None
    row_sense = {}
    row_order = []
    obj_row = None
    col_order = []
    col_entries = {}
    col_obj = {}
    col_int = {}
    rhs = {}
    bounds = {}
    in_int = False

    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        if not raw.startswith(" "):
            head = raw.split()[0].upper()
            if head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "NAME"):
                section = head
                continue
            raise MpsError(f"unexpected header line: {raw!r}")
        fields = raw.split()
        if section == "ROWS":
            typ, rn = fields[0].upper(), fields[1]
            if typ == "N":
                if obj_row is None:
                    obj_row = rn
                continue
            if typ not in _TYPE_TO_SENSE:
                raise MpsError(f"unknown row type {typ}")
            row_sense[rn] = _TYPE_TO_SENSE[typ]
            row_order.append(rn)
        elif section == "COLUMNS":
            if "'MARKER'" in raw:
                in_int = "'INTORG'" in raw
                continue
            cn = fields[0]
            if cn not in col_entries:
                col_order.append(cn)
                col_entries[cn] = []
                col_obj[cn] = 0.0
                col_int[cn] = in_int
            pairs = fields[1:]
            if len(pairs) % 2:
                raise MpsError(f"odd COLUMNS record: {raw!r}")
            for rn, val in zip(pairs[::2], pairs[1::2]):
                v = float(val)
                if rn == obj_row:
                    col_obj[cn] = v
                elif rn in row_sense:
                    col_entries[cn].append((rn, v))
                else:
                    raise MpsError(f"COLUMNS references unknown row {rn}")
        elif section == "RHS":
            pairs = fields[1:]
            for rn, val in zip(pairs[::2], pairs[1::2]):
                if rn not in row_sense and rn != obj_row:
                    raise MpsError(f"RHS references unknown row {rn}")
                rhs[rn] = float(val)
        elif section == "RANGES":
            raise MpsError("RANGES entries are not supported")
        elif section == "BOUNDS":
            btype = fields[0].upper()
            cn = fields[2]
            if cn not in col_entries:
                raise MpsError(f"BOUNDS references unknown column {cn}")
            val = float(fields[3]) if len(fields) > 3 else None
            lo, hi = bounds.get(cn, (0.0, np.inf))
            if btype in ("LO", "LI"):
                lo = val
            elif btype in ("UP", "UI"):
                hi = val
            elif btype == "FX":
                lo = hi = val
            elif btype == "MI":
                lo = -np.inf
            elif btype == "PL":
                hi = np.inf
            elif btype == "FR":
                lo, hi = -np.inf, np.inf
            elif btype == "BV":
                lo, hi = 0.0, 1.0
                col_int[cn] = True
            else:
                raise MpsError(f"unknown bound type {btype}")
            bounds[cn] = (lo, hi)
        elif section in ("NAME", None, "ENDATA"):
            continue

    if obj_row is None:
        raise MpsError("no objective (N) row found")
    col_idx = {cn: k for k, cn in enumerate(col_order)}
    variables = []
    for cn in col_order:
        lo, hi = bounds.get(cn, (0.0, np.inf))
        variables.append(Variable(cn, lo, hi, col_int[cn], col_obj[cn]))
    row_cols = {rn: [] for rn in row_order}
    for cn in col_order:
        for rn, v in col_entries[cn]:
            row_cols[rn].append((col_idx[cn], v))
    constraints = [
        Row(rn, tuple(c for c, _ in row_cols[rn]), tuple(v for _, v in row_cols[rn]),
            row_sense[rn], rhs.get(rn, 0.0))
        for rn in row_order
    ]
    return MilpInstance(variables=variables, constraints=constraints)


def solution_name_maps(vmap: VariableMap) -> dict:
    """name -> column index for both long names and the MPS short names."""
    longs = vmap.names()
    shorts = shorten_names(longs)
    table = {nm: k for k, nm in enumerate(longs)}
    for k, nm in enumerate(shorts):
        table.setdefault(nm, k)
    return table


def import_solution(text: str, vmap: VariableMap, series: FeederSeries,
                    int_tol: float = 1e-5):
    """Parse 'name value' lines from an external solver into a Schedule.

    '#' starts a comment. Unlisted variables default to 0 and are returned
    in the warnings list. Names may be the instance long names or the MPS
    short names.
    """
    from .model import schedule_from_values

    table = solution_name_maps(vmap)
    x = np.zeros(vmap.n_columns)
    seen = np.zeros(vmap.n_columns, dtype=bool)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MpsError(f"line {lineno}: expected 'name value', got {raw!r}")
        nm, sval = parts
        if nm not in table:
            raise MpsError(f"line {lineno}: unknown variable name {nm!r}")
        try:
            val = float(sval)
        except ValueError:
            raise MpsError(f"line {lineno}: bad value {sval!r}") from None
        k = table[nm]
        x[k] = val
        seen[k] = True
    for k in range(vmap.n_columns):
        role, _, _ = vmap.unpack(k)
        if role == "full" and seen[k] and abs(x[k] - round(x[k])) > int_tol:
            raise MpsError(f"integrality violated: {vmap.name(k)} = {x[k]}")
    warnings = [vmap.name(k) for k in range(vmap.n_columns) if not seen[k]]
    return schedule_from_values(x, vmap, series), warnings
