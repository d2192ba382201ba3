"""Scalar diagnostics, a-priori bound checks, decay fits and the GAPF/CSF comparison.

Arclength integrals are evaluated in the curve parameter with the metric as
weight, ``quadrature_periodic(f * g)`` in polar form and ``sum(f * ds)`` on
marker polygons, so no resampling error reaches the fitted quantities.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DecayFitRefused, InvalidCurveError
from .flows import check_law
from .geometry import marker_geometry, polar_geometry, symmetry_defect
from .integrators import evolve
from .models import (
    BoundCheck,
    BoundReport,
    ComparisonResult,
    DecayFit,
    DiagRecord,
    Event,
    FlowState,
    PolarCurve,
    StepperConfig,
)
from .spatial import diff_periodic, quadrature_periodic

DECAY_FIELDS = ("q2", "qs2")
DECAY_NOISE_FLOOR = 1e-12
CENTROSYMMETRY_TOLERANCE = 1e-10
# comparison horizon relative to the CSF extinction time A0 / (2 pi)
COMPARE_HORIZON = 1.05

# absolute tolerances are these fractions of A0 (area) or L0 (the rest)
DEFAULT_BOUND_TOLERANCES = {
    "area": 1e-6,
    "length_upper": 1e-8,
    "length_lower": 1e-8,
    "radius": 1e-8,
    "gradient": 1e-8,
    "support": 0.0,
}


def _dissipation(law: str, kappa_sq: float, total_curvature: float, length: float) -> float:
    if law == "gapf":
        return kappa_sq - 2.0 * math.pi * total_curvature / length
    return kappa_sq


def _polar_record(curve: PolarCurve, law: str, t: float, scheme: str) -> DiagRecord:
    fields = polar_geometry(curve, scheme)
    g, kappa = fields.g, fields.kappa
    length = quadrature_periodic(g)
    area = 0.5 * quadrature_periodic(curve.r * curve.r)
    kappa_s = diff_periodic(kappa, 1, scheme) / g
    kappa_sq = quadrature_periodic(kappa * kappa * g)
    total_curvature = quadrature_periodic(kappa * g)
    return DiagRecord(
        t=t,
        L=length,
        A=area,
        kappa_min=float(kappa.min()),
        kappa_max=float(kappa.max()),
        p_min=float(fields.p.min()),
        r_min=float(curve.r.min()),
        r_max=float(curve.r.max()),
        grad_max=float(np.max(np.abs(fields.r_theta))),
        deficit=length * length - 4.0 * math.pi * area,
        q2=quadrature_periodic((kappa - 2.0 * math.pi / length) ** 2 * g),
        qs2=quadrature_periodic(kappa_s * kappa_s * g),
        sym=symmetry_defect(curve),
        total_curvature=total_curvature,
        energy_gap=kappa_sq - 4.0 * math.pi**2 / length,
        dissipation=_dissipation(law, kappa_sq, total_curvature, length),
    )


def _marker_ds(values: np.ndarray, h_plus: np.ndarray, h_minus: np.ndarray) -> np.ndarray:
    """Central arclength derivative on a non-uniform closed polygon."""

    forward = np.roll(values, -1) - values
    backward = values - np.roll(values, 1)
    return (h_minus**2 * forward + h_plus**2 * backward) / (h_plus * h_minus * (h_plus + h_minus))


def _marker_record(state: FlowState, law: str) -> DiagRecord:
    pts = state.curve.pts
    geo = marker_geometry(state.curve)
    h_plus = geo.edges
    h_minus = np.roll(h_plus, 1)
    ds = geo.weight
    kappa = geo.kappa
    length = geo.length
    radii = np.linalg.norm(pts, axis=1)
    kappa_s = _marker_ds(kappa, h_plus, h_minus)
    kappa_sq = float(np.sum(kappa * kappa * ds))
    total_curvature = float(np.sum(kappa * ds))
    return DiagRecord(
        t=state.t,
        L=length,
        A=geo.area,
        kappa_min=float(kappa.min()),
        kappa_max=float(kappa.max()),
        p_min=geo.star_min,
        r_min=float(radii.min()),
        r_max=float(radii.max()),
        grad_max=float(np.max(np.abs(_marker_ds(radii, h_plus, h_minus)))),
        deficit=length * length - 4.0 * math.pi * geo.area,
        q2=float(np.sum((kappa - 2.0 * math.pi / length) ** 2 * ds)),
        qs2=float(np.sum(kappa_s * kappa_s * ds)),
        sym=None,
        total_curvature=total_curvature,
        energy_gap=kappa_sq - 4.0 * math.pi**2 / length,
        dissipation=_dissipation(law, kappa_sq, total_curvature, length),
    )


def record(state: FlowState, law: str, scheme: str = "spectral") -> DiagRecord:
    """Diagnostics of one state.

    Marker states report the closest analogues of the polar-only fields:
    p_min is min det(X, T), r is |X|, grad_max is max |d|X|/ds| and sym is
    left empty.
    """

    check_law(law)
    if isinstance(state.curve, PolarCurve):
        return _polar_record(state.curve, law, state.t, scheme)
    return _marker_record(state, law)


def length_identity_residual(history: Sequence[DiagRecord]) -> float:
    """max_k |L(t_k) - L0 + int_0^t_k dissipation| / L0 with trapezoid time integration."""

    if not history:
        raise ValueError("history is empty")
    length0 = history[0].L
    worst = 0.0
    integral = 0.0
    for previous, current in zip(history, history[1:]):
        integral += 0.5 * (current.t - previous.t) * (previous.dissipation + current.dissipation)
        worst = max(worst, abs(current.L - length0 + integral))
    return worst / length0


class Recorder:
    """Callable handed to ``evolve``; keeps the history of one run.

    ``keep_curves`` retains the curve of every record (needed for frames and
    for comparisons). ``on_record`` is invoked after each record is stored.
    """

    def __init__(
        self,
        law: str,
        scheme: str = "spectral",
        keep_curves: bool = False,
        on_record: Optional[Callable[[DiagRecord], None]] = None,
    ) -> None:
        self.law = check_law(law)
        self.scheme = scheme
        self.keep_curves = keep_curves
        self.on_record = on_record
        self.history: List[DiagRecord] = []
        self.curves: List[object] = []
        self._lock = threading.Lock()

    def __call__(self, state: FlowState) -> DiagRecord:
        entry = record(state, self.law, self.scheme)
        with self._lock:
            self.history.append(entry)
            if self.keep_curves:
                self.curves.append(state.curve)
        if self.on_record is not None:
            self.on_record(entry)
        return entry

    @property
    def initial(self) -> DiagRecord:
        return self.history[0]

    def length_identity_residual(self) -> float:
        return length_identity_residual(self.history)

    def first_time(self, predicate: Callable[[DiagRecord], bool]) -> Optional[float]:
        for entry in self.history:
            if predicate(entry):
                return entry.t
        return None


def _bound_check(
    name: str,
    samples: Iterable[Tuple[float, float]],
    tolerance: float,
) -> BoundCheck:
    worst = math.inf
    first_violation = None
    for t, margin in samples:
        worst = min(worst, margin)
        if first_violation is None and margin < -tolerance:
            first_violation = t
    return BoundCheck(name=name, worst_margin=worst, tolerance=tolerance, first_violation_t=first_violation)


def check_bounds(
    history: Sequence[DiagRecord],
    initial: Optional[DiagRecord] = None,
    tolerances: Optional[Mapping[str, float]] = None,
) -> BoundReport:
    """Signed margins (allowed - observed) of the area, length, radius, gradient and support bounds.

    ``tolerances`` overrides the relative tolerances of
    :data:`DEFAULT_BOUND_TOLERANCES` by name.
    """

    if not history:
        raise ValueError("history is empty")
    initial = initial or history[0]
    relative = dict(DEFAULT_BOUND_TOLERANCES)
    for name, value in (tolerances or {}).items():
        if name not in relative:
            raise ValueError(f"unknown bound {name!r}")
        relative[name] = float(value)

    area0, length0 = initial.A, initial.L
    c1 = max(initial.grad_max, 3.0 * length0 / math.pi)
    iso_floor = math.sqrt(4.0 * math.pi * area0)
    absolute = {
        name: value * (area0 if name == "area" else length0) for name, value in relative.items()
    }

    margins: Dict[str, List[Tuple[float, float]]] = {
        "area": [(h.t, -abs(h.A - area0)) for h in history],
        "length_upper": [(h.t, length0 - h.L) for h in history],
        "length_lower": [(h.t, h.L - iso_floor) for h in history],
        "radius": [(h.t, 0.5 * length0 - h.r_max) for h in history],
        "gradient": [(h.t, c1 - h.grad_max) for h in history],
        "support": [(h.t, h.p_min) for h in history],
    }
    checks = {name: _bound_check(name, samples, absolute[name]) for name, samples in margins.items()}
    return BoundReport(checks=checks, A0=area0, L0=length0, C1=c1)


class _RadiusCapture:
    def __init__(self, scheme: str) -> None:
        self.scheme = scheme
        self.radii: Dict[float, np.ndarray] = {}
        self.p_min = math.inf

    def __call__(self, state: FlowState) -> None:
        self.radii[state.t] = np.array(state.curve.r)
        fields = polar_geometry(state.curve, self.scheme)
        self.p_min = min(self.p_min, float(fields.p.min()))


def compare_gapf_csf(
    initial: PolarCurve,
    cfg: StepperConfig,
    scheme: str = "spectral",
) -> ComparisonResult:
    """Run GAPF and CSF from the same centrosymmetric curve and compare radii.

    Both runs share the checkpoint grid; the margin min_theta (r_GAPF - rho_CSF)
    is evaluated at every checkpoint the CSF run reached.
    """

    if not isinstance(initial, PolarCurve):
        raise InvalidCurveError("the comparison runs on polar curves")
    defect = symmetry_defect(initial)
    if defect >= CENTROSYMMETRY_TOLERANCE:
        raise InvalidCurveError(f"the comparison needs centrosymmetric data (sym = {defect:.3e})")

    area0 = 0.5 * quadrature_periodic(initial.r * initial.r)
    horizon = min(cfg.t_end, COMPARE_HORIZON * area0 / (2.0 * math.pi))
    shared = replace(cfg, t_end=horizon)

    captures = {"gapf": _RadiusCapture(scheme), "csf": _RadiusCapture(scheme)}

    def _run(law: str) -> Tuple[FlowState, List[Event]]:
        return evolve(FlowState(initial), law, shared, scheme, captures[law])

    with ThreadPoolExecutor(max_workers=2) as pool:
        futures = {law: pool.submit(_run, law) for law in ("gapf", "csf")}
        results = {law: future.result() for law, future in futures.items()}

    gapf_radii, csf_radii = captures["gapf"].radii, captures["csf"].radii
    t_grid = sorted(t for t in csf_radii if t in gapf_radii)
    margins = [float(np.min(gapf_radii[t] - csf_radii[t])) for t in t_grid]
    return ComparisonResult(
        min_margin=min(margins),
        t_grid=t_grid,
        csf_terminal=results["csf"][1][-1],
        gapf_terminal=results["gapf"][1][-1],
        gapf_p_min=captures["gapf"].p_min,
        margins=margins,
    )


def decay_fit(
    history: Sequence[DiagRecord],
    field: str,
    window: Tuple[float, float],
) -> DecayFit:
    """Least-squares slope of log(field) against t over ``window``."""

    if field not in DECAY_FIELDS:
        raise ValueError(f"decay fits support {DECAY_FIELDS}, got {field!r}")
    t_lo, t_hi = window
    if not t_hi > t_lo:
        raise ValueError(f"empty fit window {window!r}")
    selected = [entry for entry in history if t_lo <= entry.t <= t_hi]
    if len(selected) < 2:
        raise ValueError(f"history has {len(selected)} records inside {window!r}; need at least 2")

    times = np.array([entry.t for entry in selected])
    values = np.array([getattr(entry, field) for entry in selected])
    floor = float(values.min())
    if floor <= DECAY_NOISE_FLOOR:
        raise DecayFitRefused(f"{field} reaches {floor:.3e} inside the window (noise floor {DECAY_NOISE_FLOOR:g})")

    logs = np.log(values)
    slope, intercept = np.polyfit(times, logs, 1)
    residual = float(np.sqrt(np.mean((logs - (slope * times + intercept)) ** 2)))
    return DecayFit(
        field=field,
        rate=float(slope),
        residual=residual,
        window=(float(times[0]), float(times[-1])),
        samples=int(times.size),
    )


__all__ = [
    "CENTROSYMMETRY_TOLERANCE",
    "DECAY_FIELDS",
    "DECAY_NOISE_FLOOR",
    "DEFAULT_BOUND_TOLERANCES",
    "Recorder",
    "check_bounds",
    "compare_gapf_csf",
    "decay_fit",
    "length_identity_residual",
    "record",
]
