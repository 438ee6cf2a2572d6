"""Experiment reports and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1

COLUMNS = ["seed", "T", "algorithm", "rho_T", "L_star", "G_star", "bound_gstar", "bound_lstar",
           "audit_pass", "wall_ms"]


@dataclass(frozen=True)
class ReportRow:
    seed: int
    T: int
    algorithm: str
    rho_T: float
    L_star: float | None
    G_star: float
    bound_gstar: float
    bound_lstar: float | None
    audit_pass: bool | None  # None: only an in-expectation guarantee, see aggregate audits
    wall_ms: float


@dataclass(frozen=True)
class AggregateAudit:
    name: str
    measured: float
    bound: float
    passed: bool
    detail: str = ""


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    aggregates: list[AggregateAudit] = field(default_factory=list)
    config: dict | None = None

    @property
    def passed(self) -> bool:
        return all(r.audit_pass is not False for r in self.rows) and all(a.passed for a in self.aggregates)

    def failures(self) -> list[str]:
        out = [f"row seed={r.seed} T={r.T} {r.algorithm}: rho={r.rho_T!r} > bound={r.bound_gstar!r}"
               for r in self.rows if r.audit_pass is False]
        out += [f"{a.name}: measured={a.measured!r} bound={a.bound!r} {a.detail}".rstrip()
                for a in self.aggregates if not a.passed]
        return out

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "aggregates": [asdict(a) for a in self.aggregates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls([ReportRow(**r) for r in d["rows"]], [AggregateAudit(**a) for a in d["aggregates"]],
                   d.get("config"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def report_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit_report(report: ExperimentReport, fmt: str, path: str | Path) -> None:
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {p}: {exc}") from exc


def load_report(path: str | Path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))
