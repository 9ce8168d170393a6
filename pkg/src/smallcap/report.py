"""Audit records and their deterministic CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "AuditReport",
    "skip_record",
    "growth_exponent",
    "reports_to_json",
    "reports_from_json",
    "reports_to_csv",
    "reports_from_csv",
    "emit",
]

SCHEMA_VERSION = "1.0"
CSV_COLUMNS = ["name", "parameters", "measured", "bound", "fitted_constant",
               "growth_exponent", "passed", "skipped"]


def _plain(v):
    """Convert numpy scalars and arrays to JSON-native values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        return v
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class AuditReport:
    """Outcome of one audit.

    ``runtime`` is kept in memory for logging only and is never written,
    so emitted files are byte-identical across runs.
    """

    name: str
    parameters: dict = field(default_factory=dict)
    measured: float = float("nan")
    bound: float = float("nan")
    fitted_constant: float = float("nan")
    growth_exponent: float = float("nan")
    passed: bool = False
    skipped: str = ""
    runtime: float = 0.0

    @property
    def ratio(self):
        return self.measured / self.bound if self.bound else float("inf")

    def to_dict(self):
        d = asdict(self)
        d.pop("runtime")
        return _plain(d)

    @classmethod
    def from_dict(cls, d):
        kw = dict(d)
        for k in ("measured", "bound", "fitted_constant", "growth_exponent"):
            kw[k] = float(kw[k])
        kw["passed"] = bool(kw["passed"])
        return cls(**kw)


def skip_record(name, parameters, reason):
    """A report standing in for a cell that could not be run."""
    return AuditReport(name=name, parameters=parameters, passed=True, skipped=reason)


def growth_exponent(ns, constants):
    """Least-squares slope of log C against log N (nan with < 2 points)."""
    ns = np.asarray(ns, dtype=float)
    c = np.asarray(constants, dtype=float)
    ok = (c > 0) & np.isfinite(c)
    if ok.sum() < 2 or np.unique(ns[ok]).size < 2:
        return float("nan")
    return float(np.polyfit(np.log(ns[ok]), np.log(c[ok]), 1)[0])


def reports_to_json(reports):
    doc = {"schema_version": SCHEMA_VERSION, "reports": [r.to_dict() for r in reports]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def reports_from_json(text):
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')}")
    return [AuditReport.from_dict(d) for d in doc["reports"]]


def reports_to_csv(reports):
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    # strings are always quoted so stray carriage returns survive a round trip
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_NONNUMERIC)
    w.writerow(CSV_COLUMNS)
    for r in reports:
        d = r.to_dict()
        d["parameters"] = json.dumps(d["parameters"], sort_keys=True)
        w.writerow([d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def reports_from_csv(text):
    buf = io.StringIO(text, newline="")
    head = buf.readline().rstrip("\r\n")
    if not head.startswith("# schema_version="):
        raise ValueError("missing schema header")
    if head.split("=", 1)[1] != SCHEMA_VERSION:
        raise ValueError("unsupported schema version")
    out = []
    for row in csv.DictReader(buf):
        row["parameters"] = json.loads(row["parameters"])
        row["passed"] = row["passed"] == "True"
        out.append(AuditReport.from_dict(row))
    return out


def emit(reports, out_dir, stem="report", formats=("json", "csv")):
    """Write reports to ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for fmt in formats:
        p = out / f"{stem}.{fmt}"
        text = reports_to_json(reports) if fmt == "json" else reports_to_csv(reports)
        p.write_text(text, encoding="utf-8", newline="")
        paths.append(p)
    return paths
