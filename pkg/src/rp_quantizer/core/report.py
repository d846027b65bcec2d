"""report.json, timings.json and the CSV tables, plus the per-subcommand partial files."""
import csv
import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .exceptions import PrerequisiteError
from .i18n import Messages
from .runner import CHECKS, COMMANDS, CheckResult, RunReport, Verdict

SIGNIFICANT_DIGITS = 12
PARTS_DIR = "parts"
TABLES = ("kernel", "gram", "spectrum", "density")


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _clean(value.real), "im": _clean(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


def _dump(data: dict, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def build_document(report: RunReport, echo: dict) -> dict:
    return {
        "config": echo,
        "checks": {k: report.results[k].to_dict() for k in CHECKS if k in report.results},
        "constants": report.constants(),
        "summary": {v.value: report.count(v) for v in Verdict},
    }


def write_tables(tables: dict[str, list[dict]], out_dir: Path) -> list[Path]:
    written = []
    for name in TABLES:
        rows = tables.get(name)
        if not rows:
            continue
        path = out_dir / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _clean(v) for k, v in row.items()})
        written.append(path)
    return written


def write_documents(documents: dict[str, dict], out_dir: Path) -> list[Path]:
    written = []
    for name, data in documents.items():
        _dump(data, out_dir / f"{name}.json")
        written.append(out_dir / f"{name}.json")
    return written


def write_report(report: RunReport, echo: dict, out_dir: Path) -> Path:
    path = out_dir / "report.json"
    _dump(build_document(report, echo), path)
    _dump({k: r.seconds for k, r in report.results.items()}, out_dir / "timings.json")
    write_tables(report.tables, out_dir)
    write_documents(report.documents, out_dir)
    return path


def write_part(command: str, report: RunReport, echo: dict, out_dir: Path) -> Path:
    path = out_dir / PARTS_DIR / f"{command}.json"
    _dump(
        {
            "config": echo,
            "checks": {k: r.to_dict() for k, r in report.results.items()},
            "seconds": {k: r.seconds for k, r in report.results.items()},
        },
        path,
    )
    write_tables(report.tables, out_dir)
    write_documents(report.documents, out_dir)
    return path


def read_part(command: str, out_dir: Path) -> Optional[dict[str, CheckResult]]:
    path = out_dir / PARTS_DIR / f"{command}.json"
    if not path.exists():
        return None
    data = json.loads(path.read_text(encoding="utf-8"))
    seconds = data.get("seconds", {})
    out = {}
    for key, item in data.get("checks", {}).items():
        result = CheckResult.from_dict(key, item)
        result.seconds = float(seconds.get(key, 0.0))
        out[key] = result
    return out


def merge_parts(out_dir: Path, echo: dict, messages: Messages) -> tuple[Path, RunReport]:
    """Combine every subcommand's partial output into report.json."""
    results: dict[str, CheckResult] = {}
    missing = []
    for command in COMMANDS:
        part = read_part(command, out_dir)
        if part is None:
            missing.append(command)
            continue
        results.update(part)
    if missing:
        raise PrerequisiteError(messages.t("report.missing_parts", commands=", ".join(missing)))
    report = RunReport({k: results[k] for k in CHECKS if k in results}, {})
    path = out_dir / "report.json"
    _dump(build_document(report, echo), path)
    _dump({k: r.seconds for k, r in report.results.items()}, out_dir / "timings.json")
    return path, report
