"""Machine-readable verification reports.

One report per CLI command: a JSON document whose status derives
deterministically from its measurements, plus optional CSV tables for
plotting.  All volatile data (wall-clock timestamp, runtime) lives in the
single ``timing`` field so that identical runs are byte-identical outside it.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

SCHEMA_VERSION = 1

__all__ = ["Measurement", "VerificationReport", "write_json_atomic", "write_csv_atomic", "output_dir"]


@dataclass(frozen=True)
class Measurement:
    """A named value with its tolerance and provenance.

    tolerance None marks a purely informational entry; passed None means the
    entry does not participate in the status.
    """

    name: str
    value: float
    tolerance: float | None = None
    provenance: str = ""
    passed: bool | None = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "provenance": self.provenance,
            "passed": self.passed,
        }


@dataclass
class VerificationReport:
    """Pass/fail record of one check with parameter echo and measurements."""

    check_id: str
    params: dict
    measured: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add(self, name, value, tolerance=None, provenance="", passed=None) -> None:
        self.measured.append(
            Measurement(name=name, value=value, tolerance=tolerance, provenance=provenance, passed=passed)
        )

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    @property
    def status(self) -> str:
        verdicts = [m.passed for m in self.measured if m.passed is not None]
        if any(v is False for v in verdicts):
            return "fail"
        if self.warnings:
            return "warn"
        return "pass"

    def as_dict(self, runtime_seconds: float | None = None) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "check_id": self.check_id,
            "params": self.params,
            "status": self.status,
            "measured": [m.as_dict() for m in self.measured],
            "warnings": list(self.warnings),
            "timing": {
                "generated_at": datetime.now(timezone.utc).isoformat(),
                "runtime_seconds": runtime_seconds,
            },
        }
        doc.update(self.extra)
        return doc


def output_dir(explicit: str | None = None) -> str:
    """Report directory: the --out flag, else $BIHARTREE_OUT, else the cwd."""
    return explicit or os.environ.get("BIHARTREE_OUT") or os.getcwd()


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    # numpy scalars arrive via comparisons and array indexing
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json_atomic(path: str, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _csv_cell(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    return repr(v) if isinstance(v, float) else str(v)


def write_csv_atomic(path: str, header: list, rows: list) -> None:
    """Plain comma-separated output, decimal points, repr floats, no locale."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
