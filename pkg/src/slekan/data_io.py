"""Reading experimental files and persisting models, reports and tables.

Experimental files are CSV with a ``# key: value`` header block::

    # mode: uniaxial
    # stress_measure: nominal
    # stress_units: MPa
    # source: ...
    stretch,stress
    1.02,0.03

Models, calibration records and fit reports are JSON. Python's float repr is
the shortest string that parses back to the same double, so numbers round-trip
exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import spline
from .calibrate import CalibrationResult
from .errors import ParseError, ValidationError
from .hybrid import FitReport, PointRow
from .training import Dataset, FitMetrics, ModeTag

EXPERIMENTAL_MODES = ("uniaxial", "biaxial", "planar")
STRESS_MEASURES = ("nominal", "true")
REPORT_FORMAT = "slekan-fit-report/1"


@dataclass
class ExperimentalFile:
    header: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    @property
    def mode(self) -> str:
        return self.header["mode"]

    def to_dataset(self) -> Dataset:
        lam = [r[0] for r in self.rows]
        stress = [r[1] for r in self.rows]
        return Dataset(lam, stress, ModeTag(self.mode))


def _parse_float(text, path, line, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, line, column, f"not a number: {text.strip()!r}") from None
    return value


def read_experimental(path) -> ExperimentalFile:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    header = {}
    rows = []
    saw_columns = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if saw_columns:
                raise ParseError(path, lineno, 1, "header line after data")
            body = line[1:]
            if ":" not in body:
                continue
            key, _, value = body.partition(":")
            header[key.strip().lower()] = value.strip()
            continue
        if not saw_columns:
            cols = [c.strip().lower() for c in line.split(",")]
            if cols != ["stretch", "stress"]:
                raise ParseError(path, lineno, 1, "expected column line 'stretch,stress'")
            saw_columns = True
            continue
        cells = raw.split(",")
        if len(cells) != 2:
            col = len(cells[0]) + len(cells[1]) + 3 if len(cells) > 2 else len(raw) + 1
            raise ParseError(path, lineno, col, f"expected 2 fields, got {len(cells)}")
        lam = _parse_float(cells[0], path, lineno, 1)
        stress = _parse_float(cells[1], path, lineno, len(cells[0]) + 2)
        rows.append((lam, stress))
    if not saw_columns:
        raise ParseError(path, max(1, len(text.splitlines())), 1, "missing column line")

    mode = header.get("mode")
    if mode not in EXPERIMENTAL_MODES:
        raise ValidationError(path, 0, f"header mode must be one of {EXPERIMENTAL_MODES}, got {mode!r}")
    measure = header.get("stress_measure", "nominal")
    if measure not in STRESS_MEASURES:
        raise ValidationError(path, 0, f"stress_measure must be one of {STRESS_MEASURES}")
    for i, (lam, stress) in enumerate(rows, start=1):
        if not (np.isfinite(lam) and np.isfinite(stress)):
            raise ValidationError(path, i, "non-finite value")
        if lam < 1.0:
            raise ValidationError(path, i, f"stretch {lam!r} is below 1")
        if i > 1 and lam <= rows[i - 2][0]:
            raise ValidationError(path, i, f"stretch {lam!r} is not strictly increasing")
    if len(rows) < 2:
        raise ValidationError(path, len(rows), "at least two data rows are required")
    return ExperimentalFile(header, rows)


def load_experimental(path) -> Dataset:
    return read_experimental(path).to_dataset()


def bundled_path(mode: str) -> Path:
    if mode not in EXPERIMENTAL_MODES:
        raise ValueError(f"no bundled data for mode {mode!r}")
    return Path(str(resources.files("slekan") / "data" / f"treloar_{mode}.csv"))


def load_bundled(mode: str) -> Dataset:
    return load_experimental(bundled_path(mode))


def _atomic_write(path, text: str):
    """Write via a temp file in the target directory; no partial file on failure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _load_json(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.colno, exc.msg) from None


def save_spline(model: spline.SplineModel, path):
    _atomic_write(path, _dump(spline.to_dict(model)))


def load_spline(path) -> spline.SplineModel:
    d = _load_json(path)
    try:
        return spline.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, 1, 1, f"invalid spline document: {exc}") from None


def save_calibration(result: CalibrationResult, path):
    _atomic_write(path, _dump(result.to_record()))


def load_calibration(path) -> CalibrationResult:
    d = _load_json(path)
    try:
        return CalibrationResult.from_record(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, 1, 1, f"invalid calibration record: {exc}") from None


_POINT_FIELDS = ("stretch", "stress_exp", "stress_sle", "stress_kan", "stress_pred", "saturated")


def report_to_dict(report: FitReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "mode": report.mode,
        "gamma": report.gamma,
        "alpha": report.alpha,
        "E": report.youngs_modulus,
        "beta": report.beta,
        "strain_limit": report.strain_limit,
        "n_saturated": report.n_saturated,
        "subordination_ratio": report.subordination_ratio,
        "plateau_iteration": report.plateau_iteration,
        "metrics": {
            "sle": report.sle_metrics.to_dict(),
            "hybrid": report.hybrid_metrics.to_dict(),
            "sle_large_stretch_rmse": report.sle_large_stretch_rmse,
            "hybrid_large_stretch_rmse": report.hybrid_large_stretch_rmse,
        },
        "columns": list(_POINT_FIELDS),
        "points": [[getattr(p, f) for f in _POINT_FIELDS] for p in report.points],
        "residual_model": spline.to_dict(report.residual),
        "loss_history_file": report.loss_history_file,
        "loss_history": list(report.loss_history),
    }


def report_from_dict(d: dict) -> FitReport:
    if d.get("format") != REPORT_FORMAT:
        raise KeyError(f"format must be {REPORT_FORMAT!r}")
    m = d["metrics"]
    points = tuple(
        PointRow(*(float(v) for v in row[:5]), bool(row[5])) for row in d["points"]
    )
    return FitReport(
        mode=d["mode"],
        gamma=float(d["gamma"]),
        alpha=float(d["alpha"]),
        youngs_modulus=float(d["E"]),
        beta=float(d["beta"]),
        strain_limit=float(d["strain_limit"]),
        points=points,
        sle_metrics=FitMetrics.from_dict(m["sle"]),
        hybrid_metrics=FitMetrics.from_dict(m["hybrid"]),
        loss_history=tuple(float(v) for v in d["loss_history"]),
        n_saturated=int(d["n_saturated"]),
        subordination_ratio=float(d["subordination_ratio"]),
        sle_large_stretch_rmse=float(m["sle_large_stretch_rmse"]),
        hybrid_large_stretch_rmse=float(m["hybrid_large_stretch_rmse"]),
        plateau_iteration=int(d["plateau_iteration"]),
        residual=spline.from_dict(d["residual_model"]),
        loss_history_file=d.get("loss_history_file"),
    )


def save_report(report: FitReport, path):
    _atomic_write(path, _dump(report_to_dict(report)))


def load_report(path) -> FitReport:
    d = _load_json(path)
    try:
        return report_from_dict(d)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(path, 1, 1, f"invalid fit report: {exc}") from None


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_, int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows):
    """Write a plain CSV table with round-trip float formatting."""
    lines = [",".join(columns)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Read a numeric CSV written by :func:`write_csv`; returns (columns, array)."""
    path = Path(path)
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l and not l.startswith("#")]
    if not lines:
        raise ParseError(path, 1, 1, "empty table")
    columns = [c.strip() for c in lines[0].split(",")]
    data = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ParseError(path, lineno, 1, f"expected {len(columns)} fields")
        data.append([_parse_float(c, path, lineno, 1 + sum(len(x) + 1 for x in cells[:i]))
                     for i, c in enumerate(cells)])
    return columns, np.array(data, dtype=float).reshape(-1, len(columns))


def write_loss_history(path, history):
    write_csv(path, ("iteration", "loss"), ((i, float(v)) for i, v in enumerate(history)))
