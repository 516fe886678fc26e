"""
Reference design tables shipped with the package, and their re-evaluation.

Every table is a CSV with the front columns
``J1_wgc_rad_s, J2_pm_deg, Kp, Ki, Kd, lambda, mu`` (tables 1 and 2 add a
leading ``label``). The same layout is written by the optimizer, so fronts
produced here can be checked with :func:`verify_rows`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import AvrTuneError, DataFileError
from .fractional import FopidParams, OustaloupConfig
from .margins import find_margins
from .plant import TOPOLOGIES, AvrParams, exact_loop, oustaloup_loop

FRONT_COLUMNS = ("J1_wgc_rad_s", "J2_pm_deg", "Kp", "Ki", "Kd", "lambda", "mu")
TABLE_FILES = {
    "table1": "table1_representative.csv",
    "table2": "table2_robustness.csv",
    "table3": "table3_pid.csv",
    "table4": "table4_fopid.csv",
}
REPRESENTATIONS = ("exact", "oustaloup")


@dataclass(frozen=True)
class TableRow:
    wgc: float
    pm: float
    params: FopidParams
    label: str = ""


def parse_rows(text: str, source: str = "<string>") -> list[TableRow]:
    """Parse front-format CSV text; duplicate rows are dropped, order kept."""
    reader = csv.DictReader(io.StringIO(text))
    cols = reader.fieldnames or []
    missing = [c for c in FRONT_COLUMNS if c not in cols]
    if missing:
        raise DataFileError(f"{source}: missing columns {missing}")
    rows, seen = [], set()
    for lineno, rec in enumerate(reader, start=2):
        try:
            vals = [float(rec[c]) for c in FRONT_COLUMNS]
        except (TypeError, ValueError) as exc:
            raise DataFileError(f"{source}:{lineno}: malformed number ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFileError(f"{source}:{lineno}: non-finite value")
        key = tuple(vals)
        if key in seen:
            continue
        seen.add(key)
        rows.append(TableRow(vals[0], vals[1], FopidParams(*vals[2:]), rec.get("label") or ""))
    return rows


def load_csv(path: str | Path) -> list[TableRow]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc}") from None
    return parse_rows(text, str(path))


def load_table(name: str, data_dir: str | Path | None = None) -> list[TableRow]:
    """Load a bundled table by key (``table1`` ... ``table4``) or a directory override."""
    if name not in TABLE_FILES:
        raise DataFileError(f"unknown table {name!r}")
    if data_dir is not None:
        return load_csv(Path(data_dir) / TABLE_FILES[name])
    try:
        text = resources.files("avrtune.data").joinpath(TABLE_FILES[name]).read_text()
    except (OSError, ModuleNotFoundError) as exc:
        raise DataFileError(f"bundled table {name} unavailable: {exc}") from None
    return parse_rows(text, TABLE_FILES[name])


def format_rows(rows: Iterable[tuple[float, float, FopidParams]]) -> str:
    """Front CSV text; floats use ``repr`` so re-reading is lossless."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONT_COLUMNS)
    for wgc, pm, p in rows:
        w.writerow([repr(float(v)) for v in (wgc, pm, *p.as_tuple())])
    return buf.getvalue()


@dataclass(frozen=True)
class RowCheck:
    row: TableRow
    wgc: float | None
    pm: float | None
    rel_err_wgc: float
    abs_err_pm: float
    passed: bool


def check_row(
    row: TableRow,
    rtol_wgc: float,
    atol_pm: float,
    plant: AvrParams = AvrParams(),
    topology: str = "sensor",
    representation: str = "exact",
    cfg: OustaloupConfig = OustaloupConfig(),
    crossing: str = "highest",
) -> RowCheck:
    if representation == "exact":
        loop = exact_loop(row.params, plant, topology)
    elif representation == "oustaloup":
        loop = oustaloup_loop(row.params, plant, cfg, topology)
    else:
        raise ValueError(f"representation must be one of {REPRESENTATIONS}")
    try:
        m = find_margins(loop, crossing=crossing)
    except AvrTuneError:
        return RowCheck(row, None, None, math.inf, math.inf, False)
    rel = abs(m.wgc - row.wgc) / abs(row.wgc)
    dpm = abs(m.pm - row.pm)
    return RowCheck(row, m.wgc, m.pm, rel, dpm, rel <= rtol_wgc and dpm <= atol_pm)


def verify_rows(rows, rtol_wgc: float, atol_pm: float, **kw) -> tuple[float, list[RowCheck]]:
    """Pass rate and per-row checks of stated margins against recomputed ones."""
    checks = [check_row(r, rtol_wgc, atol_pm, **kw) for r in rows]
    rate = sum(c.passed for c in checks) / len(checks) if checks else 0.0
    return rate, checks


def verify_matrix(
    rows,
    rtol_wgc: float,
    atol_pm: float,
    plant: AvrParams = AvrParams(),
    cfg: OustaloupConfig = OustaloupConfig(),
    crossing: str = "highest",
):
    """Pass rates for every (topology, representation) pair."""
    out = {}
    for topo in TOPOLOGIES:
        for rep in REPRESENTATIONS:
            out[(topo, rep)] = verify_rows(
                rows, rtol_wgc, atol_pm, plant=plant, topology=topo, representation=rep, cfg=cfg, crossing=crossing
            )
    return out


def dominated_pairs(rows) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)`` where row ``i`` dominates row ``j`` under maximization."""
    pts = [(r.wgc, r.pm) for r in rows]
    out = []
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            if i != j and a[0] >= b[0] and a[1] >= b[1] and a != b:
                out.append((i, j))
    return out
