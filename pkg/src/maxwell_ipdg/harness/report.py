"""Lossless CSV/JSON export of convergence reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .study import ConvergenceReport, LevelResult

SCHEMA = "maxwell-ipdg-report/1"

CSV_COLUMNS = ("n", "h", "dofs", "err_energy", "err_sharp", "err_dagger", "err_l2", "eta",
               "osc", "effectivity", "best_ratio", "sigma")
"""Fixed CSV header.  err_energy = |||e|||, err_sharp = |||e|||_sharp,
err_dagger = |||e|||_dagger, err_l2 = ||e||_eps; empty cells mean "not computed"."""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return "%.17g" % v


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def report_to_json(report: ConvergenceReport) -> str:
    """Deterministic JSON text; Python's float repr round-trips exactly."""
    payload = {"schema": SCHEMA, **_json_safe(report.as_dict())}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def export_report(report: ConvergenceReport, fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "json":
        path.write_text(report_to_json(report))
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for lv in report.levels:
                w.writerow([_fmt(getattr(lv, c)) for c in CSV_COLUMNS])
    else:
        raise ValueError(f"unknown report format {fmt!r}; use 'json' or 'csv'")
    return path


def _unsafe(v):
    if isinstance(v, str) and v in ("nan", "inf", "-inf"):
        return float(v)
    return v


def import_report(path) -> ConvergenceReport:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {data.get('schema')!r}")
    levels = [LevelResult(**{k: _unsafe(v) for k, v in lv.items()}) for lv in data["levels"]]
    fields = {k: data[k] for k in ("case", "k", "ell", "omega", "eta_mode", "eta_star",
                                   "eta_min", "exact")}
    return ConvergenceReport(levels=levels, **fields)
