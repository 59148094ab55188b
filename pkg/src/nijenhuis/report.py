"""Machine-readable reports: fixed key order, 17-significant-digit floats."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

TOOL = "nijenhuis"


class ReportError(OSError):
    pass


@dataclass
class IntegrabilityReport:
    command: str
    input: dict
    tolerance: float
    seed: int | None
    points: list = field(default_factory=list)
    theorem: list | None = None
    witness: dict | None = None
    notes: list = field(default_factory=list)
    tool: str = TOOL
    version: str = __version__

    def as_dict(self) -> dict:
        return {
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "input": self.input,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "points": self.points,
            "theorem": self.theorem,
            "witness": self.witness,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntegrabilityReport":
        return cls(
            command=d["command"],
            input=d["input"],
            tolerance=d["tolerance"],
            seed=d["seed"],
            points=d["points"],
            theorem=d["theorem"],
            witness=d["witness"],
            notes=d["notes"],
            tool=d["tool"],
            version=d["version"],
        )


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "tolist"):
        return _encode(obj.tolist(), indent, level)
    if hasattr(obj, "item"):
        return _encode(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def to_json(report: IntegrabilityReport) -> str:
    return dumps(report.as_dict())


def from_json(text: str) -> IntegrabilityReport:
    return IntegrabilityReport.from_dict(json.loads(text))


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, (list, tuple)):
        return "(" + ",".join(_fmt(x) if not isinstance(x, float) else f"{x:.4g}" for x in v) + ")"
    return str(v)


def table(headers, rows) -> str:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


_POINT_COLUMNS = [
    ("point", lambda p: p["point"]),
    ("killing", lambda p: p["killing_residual"]),
    ("c1", lambda p: p["c1"]["residual"]),
    ("c2", lambda p: p["c2"]["residual"]),
    ("c3", lambda p: p["c3"]["residual"]),
    ("integrable", lambda p: p["integrable"]),
    ("c3_ok", lambda p: p["c3"]["verdict"]),
    ("haantjes", lambda p: p["haantjes_max_abs"]),
    ("eigenvalues", lambda p: p["eigenvalues"]),
]

_THEOREM_COLUMNS = [
    ("dim", "dim"),
    ("pattern", "pattern"),
    ("trials", "trials"),
    ("max_k3", "max_k3_residual"),
    ("dims", "constraint_dims"),
    ("verified", "verified"),
]


def to_text(report: IntegrabilityReport) -> str:
    out = [f"{report.tool} {report.version}  command={report.command}  tolerance={report.tolerance:g}  seed={report.seed}"]
    if report.points:
        if "torsion" in report.points[0]:
            out.append(table(["point", "max|N|"], [[p["point"], p["torsion_max_abs"]] for p in report.points]))
        else:
            out.append(table([h for h, _ in _POINT_COLUMNS], [[f(p) for _, f in _POINT_COLUMNS] for p in report.points]))
    if report.theorem:
        out.append(table([h for h, _ in _THEOREM_COLUMNS], [[t[k] for _, k in _THEOREM_COLUMNS] for t in report.theorem]))
    if report.witness is not None:
        w = report.witness
        out.append(table(["lambda", "k0", "k1", "k2", "k3"], [[w["lambda"], w["k0"], w["k1"], w["k2"], w["k3"]]]))
    out.extend(f"note: {n}" for n in report.notes)
    return "\n".join(out) + "\n"


def emit_report(report: IntegrabilityReport, fmt: str = "json", path=None) -> None:
    text = to_json(report) if fmt == "json" else to_text(report)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror or exc}") from None
