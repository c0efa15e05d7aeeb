"""Run reports: check tables, data series and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Check:
    """``value <= tolerance`` (``kind="max"``) or ``value >= tolerance`` (``kind="min"``)."""

    name: str
    value: float
    tolerance: float
    kind: str = "max"
    note: str = ""

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        if self.kind == "max":
            return self.value <= self.tolerance
        return self.value >= self.tolerance

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "value": _finite_or_str(self.value),
            "tolerance": self.tolerance,
            "kind": self.kind,
            "pass": self.passed,
        }
        if self.note:
            out["note"] = self.note
        return out


def _finite_or_str(x: float):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


@dataclass
class Series:
    """Tabular data: an abscissa block and matrix samples flattened to Re/Im columns."""

    name: str
    axis_names: Sequence[str]
    axis: np.ndarray
    values: np.ndarray
    label: str

    def header(self) -> list[str]:
        cols = list(self.axis_names)
        _, rows, colsn = self.values.shape
        for i in range(rows):
            for k in range(colsn):
                cols += [f"re_{self.label}{i + 1}{k + 1}", f"im_{self.label}{i + 1}{k + 1}"]
        return cols

    def rows(self) -> list[list[str]]:
        out = []
        axis = np.atleast_2d(np.asarray(self.axis, dtype=float).T).T
        for a, v in zip(axis, self.values):
            row = [repr(float(t)) for t in a]
            for z in v.reshape(-1):
                row += [repr(float(z.real)), repr(float(z.imag))]
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.rows())
        return buf.getvalue()


@dataclass
class StageResult:
    name: str
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": "pass" if self.passed else "fail",
            "checks": [c.as_dict() for c in self.checks],
            "notes": list(self.notes),
            "series": sorted(self.series),
        }


@dataclass
class Report:
    scenario: str
    provenance: dict
    stages: list = field(default_factory=list)

    @property
    def checks(self) -> list:
        return [c for s in self.stages for c in s.checks]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stages)

    def series(self) -> dict:
        out = {}
        for s in self.stages:
            out.update(s.series)
        return out

    def as_dict(self) -> dict:
        names = [c.name for c in self.checks]
        if len(names) != len(set(names)):
            raise RuntimeError("duplicate check names in report")
        return {
            "scenario": self.scenario,
            "status": "pass" if self.passed else "fail",
            "provenance": self.provenance,
            "stages": [s.as_dict() for s in self.stages],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_outputs(report: Report, out_dir: Path, emit: Optional[Sequence[str]]) -> list[Path]:
    """Write ``report.json`` and one CSV per selected series; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "report.json"
    path.write_bytes(report.to_json().encode("utf-8"))
    written.append(path)
    available = report.series()
    for name in emit or []:
        path = out_dir / f"{name}.csv"
        path.write_bytes(available[name].to_csv().encode("utf-8"))
        written.append(path)
    return written
