"""Explicit Runge-Kutta time stepping with checkpoint-aligned records and events."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import BlowUp, InvalidCurveError, SolverEvent, StarShapeLost
from .flows import check_law, marker_rhs_values, polar_rhs_values
from .geometry import _polar_fields, length_area, marker_geometry, marker_geometry_points
from .models import (
    EVENT_CONVERGED,
    EVENT_CONVEXITY,
    EVENT_TIME_LIMIT,
    Curve,
    Event,
    FlowState,
    MarkerCurve,
    PolarCurve,
    StepperConfig,
)
from .spatial import check_scheme

Recorder = Callable[[FlowState], object]

# relative tolerance used to snap t onto a checkpoint
CHECKPOINT_SNAP = 1e-12
# floor and ceiling defaults, relative to the initial curve
R_FLOOR_FRACTION = 1e-6
CONVEX_FRACTION = 1e-3
CEILING_MEAN_FACTOR = 100.0
CEILING_INITIAL_FACTOR = 10.0


def _length_area_kappa(curve: Curve, scheme: str) -> Tuple[float, float, np.ndarray]:
    if isinstance(curve, PolarCurve):
        fields = _polar_fields(curve.r, scheme)
        length, area = length_area(curve, scheme)
        return length, area, fields.kappa
    geo = marker_geometry(curve)
    return geo.length, geo.area, geo.kappa


def _mean_radius(curve: Curve) -> float:
    if isinstance(curve, PolarCurve):
        return float(np.mean(curve.r))
    return float(np.mean(np.linalg.norm(curve.pts, axis=1)))


def resolve_stepper_config(cfg: StepperConfig, initial: Curve, scheme: str = "spectral") -> StepperConfig:
    """Fill the curve-relative defaults (floor, ceiling, convexity tolerance)."""

    length, _, kappa = _length_area_kappa(initial, scheme)
    mean_curvature = 2.0 * math.pi / length
    updates = {}
    if cfg.tol_convex is None:
        updates["tol_convex"] = CONVEX_FRACTION * mean_curvature
    if cfg.r_floor is None:
        updates["r_floor"] = R_FLOOR_FRACTION * _mean_radius(initial)
    if cfg.kappa_ceiling is None:
        updates["kappa_ceiling"] = max(
            CEILING_MEAN_FACTOR * mean_curvature,
            CEILING_INITIAL_FACTOR * float(np.max(np.abs(kappa))),
        )
    return replace(cfg, **updates) if updates else cfg


def stable_dt(state: FlowState, cfg: StepperConfig, scheme: str = "spectral") -> float:
    """Explicit diffusion limit: cfl * h^2 / 2 with h the smallest arclength spacing."""

    curve = state.curve
    if isinstance(curve, PolarCurve):
        g = _polar_fields(curve.r, scheme).g
        d_theta = 2.0 * math.pi / curve.n
        limit = cfg.cfl * d_theta * d_theta * float(np.min(g * g)) / 2.0
    else:
        edges = np.linalg.norm(np.roll(curve.pts, -1, axis=0) - curve.pts, axis=1)
        limit = cfg.cfl * float(np.min(edges)) ** 2 / 2.0
    return min(cfg.dt_max, limit)


def _runge_kutta(y: np.ndarray, dt: float, rhs: Callable[[np.ndarray], np.ndarray], stepper: str) -> np.ndarray:
    if stepper == "rk4":
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        return y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    # Shu-Osher SSP-RK3
    y1 = y + dt * rhs(y)
    y2 = 0.75 * y + 0.25 * (y1 + dt * rhs(y1))
    return y / 3.0 + 2.0 / 3.0 * (y2 + dt * rhs(y2))


def _check_ceiling(kappa: np.ndarray, ceiling: Optional[float]) -> None:
    peak = float(np.max(np.abs(kappa)))
    if not math.isfinite(peak):
        raise BlowUp("non-finite curvature")
    if ceiling is not None and peak > ceiling:
        raise BlowUp(f"curvature {peak:.3e} exceeded the ceiling {ceiling:.3e}", detail=peak)


def _step_polar(curve: PolarCurve, law: str, dt: float, cfg: StepperConfig, scheme: str) -> PolarCurve:
    r_next = _runge_kutta(
        np.array(curve.r),
        dt,
        lambda r: polar_rhs_values(r, law, scheme, cfg.r_floor),
        cfg.stepper,
    )
    if not np.all(np.isfinite(r_next)):
        raise BlowUp("non-finite radial samples after step")
    r_min = float(np.min(r_next))
    if r_min <= (cfg.r_floor or 0.0):
        raise StarShapeLost(f"radius {r_min:.3e} reached the floor", detail=r_min)
    _check_ceiling(_polar_fields(r_next, scheme).kappa, cfg.kappa_ceiling)
    return PolarCurve(r_next)


def _step_marker(curve: MarkerCurve, law: str, dt: float, cfg: StepperConfig) -> MarkerCurve:
    try:
        pts_next = _runge_kutta(
            np.array(curve.pts),
            dt,
            lambda pts: marker_rhs_values(pts, law),
            cfg.stepper,
        )
        _check_ceiling(marker_geometry_points(pts_next).kappa, cfg.kappa_ceiling)
        return MarkerCurve(pts_next)
    except InvalidCurveError as exc:
        raise BlowUp(f"marker polygon degenerated: {exc}") from exc


def step(
    state: FlowState,
    law: str,
    dt: float,
    cfg: StepperConfig,
    scheme: str = "spectral",
) -> FlowState:
    """Advance one explicit step; the nonlocal length is re-evaluated at every stage."""

    check_law(law)
    check_scheme(scheme)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    try:
        if isinstance(state.curve, PolarCurve):
            curve = _step_polar(state.curve, law, dt, cfg, scheme)
        else:
            curve = _step_marker(state.curve, law, dt, cfg)
    except SolverEvent as exc:
        if exc.t is None:
            exc.t = state.t + dt
        raise
    return FlowState(curve=curve, t=state.t + dt, step_index=state.step_index + 1)


def record_times(cfg: StepperConfig, t_start: float = 0.0) -> List[float]:
    """Checkpoints t_k = t_start + k (t_end - t_start) / record_count."""

    if not cfg.t_end > t_start:
        raise ValueError(f"t_end ({cfg.t_end!r}) must exceed the start time ({t_start!r})")
    span = cfg.t_end - t_start
    count = cfg.record_count
    return [t_start + span * k / count for k in range(count + 1)]


def roundness(kappa: np.ndarray, area0: float) -> float:
    """max_j |kappa_j sqrt(A0/pi) - 1|, zero on the circle of area A0."""

    scale = math.sqrt(area0 / math.pi)
    return float(np.max(np.abs(kappa * scale - 1.0)))


def evolve(
    initial: FlowState,
    law: str,
    cfg: StepperConfig,
    scheme: str = "spectral",
    recorder: Optional[Recorder] = None,
) -> Tuple[FlowState, List[Event]]:
    """Run a flow from ``initial`` until a terminal event.

    ``recorder`` is called with the state at every checkpoint and, when a
    solver event stops the run between checkpoints, once more with the last
    accepted state. The returned event list always ends with exactly one
    terminal event.
    """

    check_law(law)
    check_scheme(scheme)
    cfg = resolve_stepper_config(cfg, initial.curve, scheme)
    times = record_times(cfg, initial.t)
    _, area0, _ = _length_area_kappa(initial.curve, scheme)

    events: List[Event] = []
    convex_seen = False
    was_not_round = False
    state = initial
    index = 0

    while True:
        if recorder is not None:
            recorder(state)
        _, _, kappa = _length_area_kappa(state.curve, scheme)
        kappa_min = float(np.min(kappa))
        if not convex_seen and kappa_min >= cfg.tol_convex:
            convex_seen = True
            events.append(Event(EVENT_CONVEXITY, state.t, kappa_min))
        if law == "gapf":
            flatness = roundness(kappa, area0)
            if flatness < cfg.tol_circle:
                if was_not_round:
                    events.append(Event(EVENT_CONVERGED, state.t, flatness))
                    return state, events
            else:
                was_not_round = True

        if index == len(times) - 1:
            events.append(Event(EVENT_TIME_LIMIT, state.t))
            return state, events

        target = times[index + 1]
        snap = CHECKPOINT_SNAP * max(1.0, abs(target))
        while target - state.t > snap:
            dt = min(stable_dt(state, cfg, scheme), target - state.t)
            try:
                state = step(state, law, dt, cfg, scheme)
            except SolverEvent as exc:
                t_event = exc.t if exc.t is not None else state.t
                events.append(Event(exc.kind, t_event, exc.detail))
                if recorder is not None and state.t != times[index]:
                    recorder(state)
                return state, events
        if state.t != target:
            state = replace(state, t=target)
        index += 1


__all__ = [
    "Recorder",
    "evolve",
    "roundness",
    "record_times",
    "resolve_stepper_config",
    "stable_dt",
    "step",
]
