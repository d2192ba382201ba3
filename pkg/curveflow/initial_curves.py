"""Builtin initial curves and the plain-text sample format.

Builtin ids are written like calls: ``circle(1)``, ``ellipse(2, 1)``,
``cos_star(1, 0.3, 4)``, ``offset_star(1, 0.2, 2, 0.1)`` and
``immersed_loops`` (optionally ``immersed_loops(1, 0.3, 3, 1)``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .core.errors import InvalidCurveError
from .core.geometry import marker_geometry, marker_turning_number, support, to_marker
from .core.models import Curve, MarkerCurve, PolarCurve, polar_grid

BUILTIN_PARAMS: Dict[str, Tuple[str, ...]] = {
    "circle": ("R",),
    "ellipse": ("a", "b"),
    "cos_star": ("a", "eps", "k"),
    "offset_star": ("a", "eps", "k", "shift"),
    "immersed_loops": ("a", "eps", "windings", "lobes"),
}
BUILTIN_DEFAULTS: Dict[str, Tuple[float, ...]] = {
    "immersed_loops": (1.0, 0.3, 3.0, 1.0),
}
INTEGER_PARAMS = {"k", "windings", "lobes"}
MARKER_ONLY = {"immersed_loops"}

_CURVE_ID = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class BuiltinCurve:
    name: str
    params: Tuple[float, ...]

    @property
    def backend(self) -> str:
        return "marker" if self.name in MARKER_ONLY else "polar"

    def param(self, key: str) -> float:
        return self.params[BUILTIN_PARAMS[self.name].index(key)]

    def __str__(self) -> str:
        args = ", ".join(repr(value) for value in self.params)
        return f"{self.name}({args})"


def parse_curve_id(text: Union[str, BuiltinCurve]) -> BuiltinCurve:
    """Parse ``name(p1, p2, ...)`` into a :class:`BuiltinCurve`."""

    if isinstance(text, BuiltinCurve):
        return text
    match = _CURVE_ID.match(str(text))
    if not match:
        raise InvalidCurveError(f"curve id {text!r} is not of the form name(p1, p2, ...)")
    name, raw_args = match.group(1), match.group(2)
    if name not in BUILTIN_PARAMS:
        raise InvalidCurveError(f"unknown builtin curve {name!r}; expected one of {sorted(BUILTIN_PARAMS)}")

    expected = BUILTIN_PARAMS[name]
    if raw_args is None or not raw_args.strip():
        if name not in BUILTIN_DEFAULTS:
            raise InvalidCurveError(f"{name} needs parameters {expected}")
        return BuiltinCurve(name, BUILTIN_DEFAULTS[name])
    try:
        values = tuple(float(part) for part in raw_args.split(","))
    except ValueError as exc:
        raise InvalidCurveError(f"curve id {text!r} has a non-numeric parameter") from exc
    if len(values) != len(expected):
        raise InvalidCurveError(f"{name} takes {len(expected)} parameters {expected}, got {len(values)}")
    for key, value in zip(expected, values):
        if not math.isfinite(value):
            raise InvalidCurveError(f"{name}: parameter {key} must be finite")
        if key in INTEGER_PARAMS and value != int(value):
            raise InvalidCurveError(f"{name}: parameter {key} must be an integer, got {value!r}")
    return BuiltinCurve(name, values)


def _require(condition: bool, curve: BuiltinCurve, invariant: str) -> None:
    if not condition:
        raise InvalidCurveError(f"{curve}: {invariant}")


def _checked_star(curve: BuiltinCurve, radius: np.ndarray) -> PolarCurve:
    _require(bool(np.all(radius > 0.0)), curve, "radius must stay positive")
    polar = PolarCurve(radius)
    _require(float(support(polar).min()) > 0.0, curve, "support function p_min must be positive")
    return polar


def _immersed_loops(curve: BuiltinCurve, m: int) -> MarkerCurve:
    a, eps, windings, lobes = curve.params
    windings, lobes = int(windings), int(lobes)
    _require(a > 0.0, curve, "scale a must be positive")
    _require(0.0 <= eps < 1.0, curve, "eps must lie in [0, 1)")
    _require(windings >= 2, curve, "windings must be at least 2")
    _require(lobes >= 1 and math.gcd(lobes, windings) == 1, curve, "lobes must be coprime with windings")

    # polar angle phi winds `windings` times; the radius closes after the last turn
    phi = 2.0 * math.pi * windings * np.arange(m) / m
    radius = a * (1.0 + eps * np.cos(lobes * phi / windings))
    loops = MarkerCurve(np.column_stack((radius * np.cos(phi), radius * np.sin(phi))))

    geo = marker_geometry(loops)
    _require(float(geo.kappa.min()) > 0.0, curve, "curvature must be positive everywhere")
    _require(geo.star_min > 0.0, curve, "min det(X, T) must be positive")
    _require(round(marker_turning_number(loops)) == windings, curve, "turning number must equal windings")
    return loops


def build_initial(
    curve_id: Union[str, BuiltinCurve],
    size: int,
    backend: Optional[str] = None,
) -> Curve:
    """Sample a builtin curve on ``size`` nodes (polar) or points (marker).

    Polar builtins are converted with :func:`to_marker` when ``backend`` is
    ``"marker"``; marker-only builtins refuse the polar backend.
    """

    curve = parse_curve_id(curve_id)
    backend = backend or curve.backend
    if curve.name in MARKER_ONLY:
        if backend != "marker":
            raise InvalidCurveError(f"{curve.name} is only available on the marker backend")
        return _immersed_loops(curve, size)

    theta = polar_grid(size)
    if curve.name == "circle":
        (big_r,) = curve.params
        _require(big_r > 0.0, curve, "radius must be positive")
        polar = PolarCurve(np.full(size, big_r))
    elif curve.name == "ellipse":
        a, b = curve.params
        _require(a > 0.0 and b > 0.0, curve, "semi-axes must be positive")
        polar = PolarCurve(a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2))
    elif curve.name == "cos_star":
        a, eps, k = curve.params
        _require(a > 0.0, curve, "scale a must be positive")
        polar = _checked_star(curve, a * (1.0 + eps * np.cos(k * theta)))
    else:
        a, eps, k, shift = curve.params
        _require(a > 0.0, curve, "scale a must be positive")
        polar = _checked_star(
            curve, a * (1.0 + eps * np.cos(k * theta) + shift * np.cos((k + 1) * theta))
        )
    return to_marker(polar) if backend == "marker" else polar


def parse_samples(text: str) -> Curve:
    """First line is the sample count, then one radius or one ``x y`` pair per line."""

    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise InvalidCurveError("sample file is empty")
    try:
        count = int(lines[0])
    except ValueError as exc:
        raise InvalidCurveError(f"first line must be the sample count, got {lines[0]!r}") from exc
    rows = [line.split() for line in lines[1:]]
    if len(rows) != count:
        raise InvalidCurveError(f"sample file declares {count} samples but has {len(rows)}")
    widths = {len(row) for row in rows}
    if widths == {1}:
        return PolarCurve(np.array([float(row[0]) for row in rows]))
    if widths == {2}:
        return MarkerCurve(np.array([[float(row[0]), float(row[1])] for row in rows]))
    raise InvalidCurveError("sample lines must hold one radius or two coordinates each")


def format_samples(curve: Curve) -> str:
    if isinstance(curve, PolarCurve):
        rows: Sequence[str] = [repr(float(value)) for value in curve.r]
    else:
        rows = [f"{float(x)!r} {float(y)!r}" for x, y in curve.pts]
    return "\n".join([str(len(rows)), *rows]) + "\n"


def read_samples(path: Union[str, Path]) -> Curve:
    return parse_samples(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "BUILTIN_PARAMS",
    "BuiltinCurve",
    "build_initial",
    "format_samples",
    "parse_curve_id",
    "parse_samples",
    "read_samples",
]
