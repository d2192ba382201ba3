"""Domain models for curve flows.

Curves are immutable value objects: their sample arrays are copied on
construction and flagged read-only, so any state can be shared between
threads and between the two solvers of a comparison run.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import InvalidCurveError

SPATIAL_SCHEMES = ("spectral", "fd2", "fd4")
FLOW_LAWS = ("gapf", "csf")
STEPPERS = ("rk4", "ssprk3")
BACKENDS = ("polar", "marker")

EVENT_CONVEXITY = "ConvexityReached"
EVENT_CONVERGED = "Converged"
EVENT_STAR_LOST = "StarShapeLost"
EVENT_BLOW_UP = "BlowUp"
EVENT_TIME_LIMIT = "TimeLimit"
EVENT_KINDS = (EVENT_CONVEXITY, EVENT_CONVERGED, EVENT_STAR_LOST, EVENT_BLOW_UP, EVENT_TIME_LIMIT)
TERMINAL_EVENTS = (EVENT_CONVERGED, EVENT_STAR_LOST, EVENT_BLOW_UP, EVENT_TIME_LIMIT)

MIN_POLAR_NODES = 16
MIN_MARKER_POINTS = 8
# degenerate edge: shorter than this fraction of the curve diameter
EDGE_TOLERANCE = 1e-12

CSV_VERSION = 1
CSV_COLUMNS = [
    "t",
    "L",
    "A",
    "kappa_min",
    "kappa_max",
    "p_min",
    "r_min",
    "r_max",
    "grad_max",
    "deficit",
    "q2",
    "qs2",
    "sym",
]


def polar_grid(n: int) -> np.ndarray:
    """Uniform periodic nodes theta_j = 2*pi*j/n."""

    return 2.0 * math.pi * np.arange(n) / n


def _shoelace(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _readonly(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class PolarCurve:
    """Radial samples r_j > 0 at the nodes theta_j of a uniform grid."""

    r: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.r, dtype=float)
        if r.ndim != 1:
            raise InvalidCurveError("PolarCurve.r must be one-dimensional")
        n = r.size
        if n < MIN_POLAR_NODES or n % 2:
            raise InvalidCurveError(f"PolarCurve needs an even grid size >= {MIN_POLAR_NODES}, got {n}")
        if not np.all(np.isfinite(r)):
            raise InvalidCurveError("PolarCurve radii must be finite")
        if np.any(r <= 0.0):
            raise InvalidCurveError(f"PolarCurve radii must be positive (min r = {float(r.min())!r})")
        object.__setattr__(self, "r", _readonly(r))

    @property
    def n(self) -> int:
        return int(self.r.size)

    @property
    def theta(self) -> np.ndarray:
        return polar_grid(self.n)

    @classmethod
    def from_function(cls, radius: Callable[[np.ndarray], np.ndarray], n: int) -> "PolarCurve":
        return cls(np.asarray(radius(polar_grid(n)), dtype=float))


@dataclass(frozen=True, eq=False)
class MarkerCurve:
    """Closed polyline of plane points, normalised to counterclockwise order."""

    pts: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidCurveError("MarkerCurve.pts must have shape (m, 2)")
        m = pts.shape[0]
        if m < MIN_MARKER_POINTS:
            raise InvalidCurveError(f"MarkerCurve needs at least {MIN_MARKER_POINTS} points, got {m}")
        if not np.all(np.isfinite(pts)):
            raise InvalidCurveError("MarkerCurve points must be finite")

        edges = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        diameter = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        if diameter <= 0.0 or float(edges.min()) <= EDGE_TOLERANCE * diameter:
            raise InvalidCurveError(
                f"MarkerCurve has a degenerate edge (min edge = {float(edges.min())!r}, diameter = {diameter!r})"
            )

        area = _shoelace(pts)
        if area == 0.0:
            raise InvalidCurveError("MarkerCurve has zero signed area; orientation is undefined")
        if area < 0.0:
            pts = pts[::-1].copy()
        object.__setattr__(self, "pts", _readonly(pts))

    @property
    def m(self) -> int:
        return int(self.pts.shape[0])


Curve = Union[PolarCurve, MarkerCurve]


@dataclass(frozen=True, eq=False)
class GeometryFields:
    """Metric, curvature and support samples aligned with a polar grid."""

    g: np.ndarray
    kappa: np.ndarray
    r_theta: np.ndarray
    r_thetatheta: np.ndarray
    p: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class MarkerGeometry:
    tangent: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    weight: np.ndarray
    edges: np.ndarray
    det: np.ndarray
    length: float
    area: float
    star_min: float


@dataclass(frozen=True, eq=False)
class FlowState:
    curve: Curve
    t: float = 0.0
    step_index: int = 0

    @property
    def backend(self) -> str:
        return "polar" if isinstance(self.curve, PolarCurve) else "marker"


@dataclass(frozen=True)
class Event:
    kind: str
    t_event: float
    detail: float = float("nan")

    @property
    def terminal(self) -> bool:
        return self.kind in TERMINAL_EVENTS

    def to_dict(self) -> Dict[str, Any]:
        detail = None if math.isnan(self.detail) else self.detail
        return {"kind": self.kind, "t_event": self.t_event, "detail": detail}


@dataclass(frozen=True)
class StepperConfig:
    """Time-stepping knobs. ``None`` fields are resolved from the initial curve."""

    stepper: str = "rk4"
    cfl: float = 0.4
    dt_max: float = 1e-2
    t_end: float = 10.0
    tol_convex: Optional[float] = None
    tol_circle: float = 1e-4
    r_floor: Optional[float] = None
    kappa_ceiling: Optional[float] = None
    record_count: int = 200

    def __post_init__(self) -> None:
        if self.stepper not in STEPPERS:
            raise ValueError(f"unknown stepper {self.stepper!r}; expected one of {STEPPERS}")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl!r}")
        if self.record_count < 1:
            raise ValueError("record_count must be at least 1")
        for name in ("dt_max", "t_end", "tol_circle", "tol_convex", "r_floor", "kappa_ceiling"):
            value = getattr(self, name)
            if value is not None and not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value!r}")


@dataclass
class DiagRecord:
    t: float
    L: float
    A: float
    kappa_min: float
    kappa_max: float
    p_min: float
    r_min: float
    r_max: float
    grad_max: float
    deficit: float
    q2: float
    qs2: float
    sym: Optional[float]
    total_curvature: float = 2.0 * math.pi
    energy_gap: float = 0.0
    # -dL/dt predicted by the flow law
    dissipation: float = 0.0

    def to_row(self) -> List[str]:
        row = []
        for column in CSV_COLUMNS:
            value = getattr(self, column)
            row.append("" if value is None else repr(float(value)))
        return row

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    worst_margin: float
    tolerance: float
    first_violation_t: Optional[float] = None

    @property
    def violated(self) -> bool:
        return self.first_violation_t is not None


@dataclass(frozen=True)
class BoundReport:
    checks: Dict[str, BoundCheck]
    A0: float
    L0: float
    C1: float

    @property
    def violations(self) -> List[BoundCheck]:
        return [check for check in self.checks.values() if check.violated]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A0": self.A0,
            "L0": self.L0,
            "C1": self.C1,
            "ok": self.ok,
            "checks": {name: asdict(check) for name, check in self.checks.items()},
        }


@dataclass(frozen=True)
class DecayFit:
    field: str
    rate: float
    residual: float
    window: Tuple[float, float]
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ConsistencyResiduals:
    kappa: float
    support: float
    support_slope: float
    support_curvature: float


@dataclass(frozen=True)
class ComparisonResult:
    min_margin: float
    t_grid: List[float]
    csf_terminal: Event
    gapf_terminal: Event
    gapf_p_min: float
    margins: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "min_margin": self.min_margin,
            "t_grid": list(self.t_grid),
            "margins": list(self.margins),
            "csf_terminal": self.csf_terminal.to_dict(),
            "gapf_terminal": self.gapf_terminal.to_dict(),
            "gapf_p_min": self.gapf_p_min,
        }


__all__ = [
    "BACKENDS",
    "BoundCheck",
    "BoundReport",
    "CSV_COLUMNS",
    "CSV_VERSION",
    "ComparisonResult",
    "ConsistencyResiduals",
    "Curve",
    "DecayFit",
    "DiagRecord",
    "EDGE_TOLERANCE",
    "EVENT_BLOW_UP",
    "EVENT_CONVERGED",
    "EVENT_CONVEXITY",
    "EVENT_KINDS",
    "EVENT_STAR_LOST",
    "EVENT_TIME_LIMIT",
    "Event",
    "FLOW_LAWS",
    "FlowState",
    "GeometryFields",
    "MIN_MARKER_POINTS",
    "MIN_POLAR_NODES",
    "MarkerCurve",
    "MarkerGeometry",
    "PolarCurve",
    "SPATIAL_SCHEMES",
    "STEPPERS",
    "StepperConfig",
    "TERMINAL_EVENTS",
    "polar_grid",
]
