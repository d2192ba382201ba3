"""Result files: CSV time series, SVG frames, JSON report, curve samples.

Every file goes through ``_atomic_write`` so an interrupted or failing write
never leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, List, Sequence, Tuple

import numpy as np

from .config_store import _atomic_write
from .core.errors import ScenarioError
from .core.geometry import to_marker
from .core.models import CSV_COLUMNS, Curve, DiagRecord, PolarCurve
from .initial_curves import format_samples
from .observability import log_event

FRAME_MARGIN = 1.5


def _write(path: Path, payload: str, kind: str) -> Path:
    path = Path(path)
    try:
        _atomic_write(path, payload)
    except OSError as exc:
        raise ScenarioError(f"No se pudo escribir {path}: {exc}") from exc
    log_event("output.written", kind=kind, path=str(path))
    return path


def format_csv(history: Sequence[DiagRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for entry in history:
        writer.writerow(entry.to_row())
    return buffer.getvalue()


def write_csv(path: Path, history: Sequence[DiagRecord]) -> Path:
    return _write(path, format_csv(history), "csv")


def _points(curve: Curve) -> np.ndarray:
    return to_marker(curve).pts if isinstance(curve, PolarCurve) else curve.pts


def frame_viewbox(initial: Curve) -> Tuple[float, float, float, float]:
    """Bounding box of the initial curve scaled by 1.5 about its centre, in SVG axes."""

    pts = _points(initial)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    centre = 0.5 * (lo + hi)
    half = 0.5 * FRAME_MARGIN * (hi - lo)
    # SVG y grows downwards
    return float(centre[0] - half[0]), float(-centre[1] - half[1]), float(2 * half[0]), float(2 * half[1])


def format_frame(curve: Curve, viewbox: Tuple[float, float, float, float], t: float) -> str:
    pts = _points(curve)
    closed = np.vstack((pts, pts[:1]))
    coords = " ".join(f"{x:.6f},{-y:.6f}" for x, y in closed)
    x0, y0, width, height = viewbox
    stroke = max(width, height) / 400.0
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0!r} {y0!r} {width!r} {height!r}">\n'
        f"  <title>t = {t!r}</title>\n"
        f'  <polyline fill="none" stroke="black" stroke-width="{stroke!r}" points="{coords}"/>\n'
        "</svg>\n"
    )


def write_frames(directory: Path, curves: Sequence[Curve], times: Sequence[float]) -> List[Path]:
    if len(curves) != len(times):
        raise ValueError("one time per frame is required")
    if not curves:
        return []
    viewbox = frame_viewbox(curves[0])
    directory = Path(directory)
    return [
        _write(directory / f"frame_{index:05d}.svg", format_frame(curve, viewbox, t), "frame")
        for index, (curve, t) in enumerate(zip(curves, times))
    ]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def format_report(payload: Any) -> str:
    return json.dumps(_jsonable(payload), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def write_report(path: Path, payload: Any) -> Path:
    return _write(path, format_report(payload), "report")


def write_samples(path: Path, curve: Curve) -> Path:
    return _write(path, format_samples(curve), "samples")


__all__ = [
    "format_csv",
    "format_frame",
    "format_report",
    "frame_viewbox",
    "write_csv",
    "write_frames",
    "write_report",
    "write_samples",
]
