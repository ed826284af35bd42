"""CSV/JSON readers and writers, plot data and SVG rendering.

Floats are written with ``repr``, which is the shortest string that parses
back to the same double, so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .diagnostics import CentroidStdReport
from .quantizer import QuantizationResult


class InputFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def _fmt(x: float) -> str:
    return repr(float(x))


def read_points_csv(path, header: bool = False) -> np.ndarray:
    """Read one point per row; every row must have the same number of columns."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise InputFormatError(path, lineno, f"non-numeric value in row {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise InputFormatError(path, lineno, "non-finite value")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputFormatError(path, lineno, f"expected {width} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise InputFormatError(path, 1, "no data rows")
    return np.array(rows, dtype=float)


def read_weights_csv(path, header: bool = False) -> np.ndarray:
    w = read_points_csv(path, header=header)
    if w.shape[1] != 1:
        raise InputFormatError(path, 1, f"weights file must have one column, got {w.shape[1]}")
    return w[:, 0]


def write_csv(path, rows, header: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, np.integer)) and not isinstance(v, bool)
                             else _fmt(v) for v in row])


def write_points_csv(path, points, header: list[str] | None = None) -> None:
    write_csv(path, np.atleast_2d(np.asarray(points, dtype=float)).tolist(), header)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return None
        return float(obj)
    return obj


def dump_json(obj, path) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def result_to_dict(res: QuantizationResult) -> dict:
    return {
        "prototypes": res.codebook,
        "masses": res.masses,
        "distortion": res.distortion,
        "iterations": list(res.iterations),
        "converged": res.converged,
        "assignment": res.assignment,
        "history": list(res.history),
        "recovered": list(res.recovered),
        "start_distortions": list(res.start_distortions),
    }


def result_from_dict(d: dict) -> QuantizationResult:
    return QuantizationResult(
        codebook=np.array(d["prototypes"], dtype=float),
        masses=np.array(d["masses"], dtype=float),
        distortion=float(d["distortion"]),
        iterations=[int(i) for i in d["iterations"]],
        assignment=np.array(d.get("assignment", []), dtype=np.intp),
        converged=bool(d["converged"]),
        history=[float(v) for v in d.get("history", [])],
        recovered=[bool(v) for v in d.get("recovered", [])],
        start_distortions=[float(v) for v in d.get("start_distortions", [])],
    )


def save_result(res: QuantizationResult, path) -> None:
    dump_json(result_to_dict(res), path)


def load_result(path) -> QuantizationResult:
    return result_from_dict(load_json(path))


def load_codebook(path) -> np.ndarray:
    """Prototypes from a result JSON, a ``{"prototypes": ...}`` object or a bare list."""
    data = load_json(path)
    if isinstance(data, dict):
        if "prototypes" not in data:
            raise InputFormatError(path, 1, "JSON object has no 'prototypes' field")
        data = data["prototypes"]
    cb = np.array(data, dtype=float)
    if cb.ndim == 1:
        cb = cb.reshape(-1, 1)
    if cb.ndim != 2 or len(cb) == 0:
        raise InputFormatError(path, 1, "prototypes must be a non-empty list of points")
    return cb


def std_report_to_dict(rep: CentroidStdReport) -> dict:
    sets = []
    for cb, cells in zip(rep.codebooks, rep.cells):
        sets.append({
            "prototypes": cb,
            "cells": [{
                "cell": c.cell,
                "centroid": c.centroid,
                "std": None if c.std is None else c.std,
                "effective_batches": c.effective_batches,
            } for c in cells],
        })
    return {"nv": rep.nv, "n_batches": rep.n_batches, "prototype_sets": sets}


# --- plot data -------------------------------------------------------------

SCATTER_HEADER = ["y1", "y2", "weight", "cell"]
PROTOTYPE_HEADER = ["cell", "y1", "y2", "mass"]


def write_scatter_csv(path, points, weights, assignment) -> None:
    rows = [[p[0], p[1], w, int(c)] for p, w, c in zip(np.asarray(points), weights, assignment)]
    write_csv(path, rows, SCATTER_HEADER)


def write_prototypes_csv(path, codebook, masses) -> None:
    rows = [[j, p[0], p[1], m] for j, (p, m) in enumerate(zip(np.asarray(codebook), masses))]
    write_csv(path, rows, PROTOTYPE_HEADER)


_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def svg_from_csv(scatter_path, prototypes_path, title: str = "", size: int = 480) -> str:
    """Scatter of sampled outputs (area ~ weight) with prototype crosses."""
    pts = read_points_csv(scatter_path, header=True)
    protos = read_points_csv(prototypes_path, header=True)
    xy = np.vstack([pts[:, :2], protos[:, 1:3]])
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    margin = 40
    inner = size - 2 * margin

    def to_px(p):
        u = (p - lo) / span
        return margin + u[0] * inner, size - margin - u[1] * inner

    wmax = float(pts[:, 2].max()) if len(pts) else 1.0
    wmax = wmax if wmax > 0 else 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{inner}" height="{inner}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
    ]
    if title:
        out.append(f'<text x="{size / 2:.1f}" y="{margin / 2:.1f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{_escape(title)}</text>')
    out.append(f'<text x="{margin}" y="{size - 10}" font-family="sans-serif" font-size="11">'
               f'y1 [{lo[0]:.3g}, {hi[0]:.3g}]</text>')
    out.append(f'<text x="{size - margin}" y="{size - 10}" text-anchor="end" '
               f'font-family="sans-serif" font-size="11">y2 [{lo[1]:.3g}, {hi[1]:.3g}]</text>')
    for y1, y2, w, c in pts:
        x, y = to_px(np.array([y1, y2]))
        r = 1.0 + 6.0 * math.sqrt(max(w, 0.0) / wmax)
        color = _PALETTE[int(c) % len(_PALETTE)]
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="{color}" '
                   'fill-opacity="0.5"/>')
    for j, y1, y2, _ in protos:
        x, y = to_px(np.array([y1, y2]))
        out.append(f'<path d="M{x - 6:.2f},{y - 6:.2f}L{x + 6:.2f},{y + 6:.2f}'
                   f'M{x - 6:.2f},{y + 6:.2f}L{x + 6:.2f},{y - 6:.2f}" '
                   'stroke="black" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
