"""Acceptance suite: reruns the reference experiments and checks their tolerances.

Each criterion is evaluated from runs that share nothing, so the runs are
executed concurrently and their checks are collected in a :class:`SuiteState`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np

from ..core.diagnostics import Recorder, check_bounds, compare_gapf_csf, decay_fit
from ..core.errors import DecayFitRefused
from ..core.geometry import metric_and_curvature
from ..core.integrators import evolve
from ..core.models import (
    EVENT_BLOW_UP,
    EVENT_CONVERGED,
    EVENT_CONVEXITY,
    EVENT_STAR_LOST,
    Event,
    FlowState,
    StepperConfig,
)
from ..core.spatial import resample
from ..initial_curves import build_initial
from ..observability import log_event
from ..suite_state import SuiteState
from .runner import auto_decay_window

DEFAULT_TOLERANCES: Dict[str, float] = {
    "area": 1e-6,
    "length_monotone": 1e-10,
    "length_floor": 1e-4,
    "circle": 1e-3,
    "bounds": 1e-8,
    "symmetry": 1e-8,
    "compare": 1e-4,
    "csf_radius": 1e-6,
    "csf_extinction": 1e-2,
    "q2": 1e-4,
    "decay_factor": 0.5,
    "convergence_ratio": 4.0,
}

GAPF_RUNS = {
    "ellipse": "ellipse(2, 1)",
    "cos_star_2": "cos_star(1, 0.25, 2)",
    "cos_star_6": "cos_star(1, 0.15, 6)",
}
GAPF_SOLVER = StepperConfig(t_end=20.0, record_count=200)
CSF_CIRCLE_SOLVER = StepperConfig(t_end=0.75, record_count=200)
CSF_CIRCLE_PROBE_T = 0.375
IMMERSED_SOLVER = StepperConfig(t_end=2.0, record_count=400)
IMMERSED_POINTS = 192
CONVERGENCE_SOLVER = StepperConfig(t_end=0.25, record_count=5)
CONVERGENCE_GRIDS = (128, 256, 512)
COMPARE_RUNS = ("ellipse", "cos_star_2")


@dataclass
class SimulatedRun:
    recorder: Recorder
    events: List[Event]
    final: FlowState

    @property
    def terminal(self) -> Event:
        return self.events[-1]

    def event_time(self, kind: str) -> Optional[float]:
        return next((event.t_event for event in self.events if event.kind == kind), None)


def simulate(curve_id: str, size: int, law: str, solver: StepperConfig, scheme: str = "spectral") -> SimulatedRun:
    initial = build_initial(curve_id, size)
    recorder = Recorder(law, scheme)
    final, events = evolve(FlowState(initial), law, solver, scheme, recorder)
    return SimulatedRun(recorder=recorder, events=events, final=final)


class _Checks:
    def __init__(self, state: SuiteState, tolerances: Mapping[str, float]) -> None:
        self.state = state
        self.tol = tolerances

    def add(self, criterion: int, name: str, passed: bool, observed: Any, threshold: Any, detail: str = "") -> None:
        self.state.add_check(
            criterion=criterion,
            name=name,
            passed=bool(passed),
            observed=observed,
            threshold=threshold,
            detail=detail,
        )
        log_event("verify.check", criterion=criterion, name=name, passed=bool(passed), observed=observed)


def _check_gapf(checks: _Checks, label: str, run: SimulatedRun) -> None:
    history = run.recorder.history
    first = history[0]
    tol = checks.tol

    if label == "ellipse":
        drift = max(abs(entry.A - first.A) for entry in history) / first.A
        checks.add(1, "area_conservation", drift < tol["area"], drift, tol["area"])

        rises = [later.L - earlier.L for earlier, later in zip(history, history[1:])]
        worst_rise = max(rises) if rises else 0.0
        allowed = tol["length_monotone"] * first.L
        checks.add(2, "length_nonincreasing", worst_rise <= allowed, worst_rise, allowed)
        iso = math.sqrt(4.0 * math.pi * first.A) - tol["length_floor"]
        checks.add(2, "length_isoperimetric_floor", history[-1].L >= iso, history[-1].L, iso)

        q2_final = history[-1].q2
        checks.add(8, "q2_final", q2_final < tol["q2"], q2_final, tol["q2"])
        required = tol["decay_factor"] * (2.0 * math.pi / first.L) ** 2
        window = auto_decay_window(history, run.events)
        try:
            if window is None:
                raise DecayFitRefused("no post-convexity window")
            rate = decay_fit(history, "qs2", window).rate
            checks.add(8, "qs2_decay_rate", rate <= -required, rate, -required)
        except (DecayFitRefused, ValueError) as exc:
            checks.add(8, "qs2_decay_rate", False, None, -required, str(exc))

    converged = run.terminal.kind == EVENT_CONVERGED
    target = math.sqrt(math.pi / first.A)
    curve = run.final.curve
    kappa = metric_and_curvature(curve).kappa
    flatness = float(np.max(np.abs(kappa - target)))
    allowed = tol["circle"] * target
    checks.add(
        3,
        f"{label}_converged",
        converged and flatness < allowed,
        flatness,
        allowed,
        f"terminal={run.terminal.kind}",
    )
    convex_t = run.event_time(EVENT_CONVEXITY)
    checks.add(
        3,
        f"{label}_convex_before_converged",
        convex_t is not None and converged and convex_t <= run.terminal.t_event,
        convex_t,
        run.terminal.t_event,
    )

    bounds = check_bounds(history, first, {"radius": tol["bounds"], "gradient": tol["bounds"]})
    for name in ("radius", "gradient"):
        check = bounds.checks[name]
        checks.add(4, f"{label}_{name}_bound", not check.violated, check.worst_margin, -check.tolerance)

    worst_sym = max(entry.sym / entry.r_max for entry in history)
    checks.add(5, f"{label}_symmetry", worst_sym < tol["symmetry"], worst_sym, tol["symmetry"])


def _check_comparison(checks: _Checks, label: str, curve_id: str) -> None:
    result = compare_gapf_csf(build_initial(curve_id, 256), GAPF_SOLVER)
    floor = -checks.tol["compare"]
    checks.add(6, f"{label}_comparison_margin", result.min_margin >= floor, result.min_margin, floor)
    checks.add(6, f"{label}_gapf_support_positive", result.gapf_p_min > 0.0, result.gapf_p_min, 0.0)


def _check_csf_circle(checks: _Checks, run: SimulatedRun) -> None:
    probe = next((entry for entry in run.recorder.history if entry.t == CSF_CIRCLE_PROBE_T), None)
    exact = math.sqrt(1.0 - 2.0 * CSF_CIRCLE_PROBE_T)
    error = None if probe is None else max(abs(probe.r_max - exact), abs(probe.r_min - exact))
    checks.add(
        7,
        "csf_circle_radius",
        error is not None and error < checks.tol["csf_radius"],
        error,
        checks.tol["csf_radius"],
    )
    terminal = run.terminal
    relative = abs(terminal.t_event - 0.5) / 0.5
    checks.add(
        7,
        "csf_circle_extinction_time",
        terminal.kind in (EVENT_STAR_LOST, EVENT_BLOW_UP) and relative < checks.tol["csf_extinction"],
        terminal.t_event,
        0.5,
        f"terminal={terminal.kind}",
    )


def _check_immersed(checks: _Checks, run: SimulatedRun) -> None:
    history = run.recorder.history
    initial = history[0].p_min
    lost = run.recorder.first_time(lambda entry: entry.t > 0.0 and entry.p_min <= 0.0)
    checks.add(9, "immersed_star_initially", initial > 0.0, initial, 0.0)
    checks.add(9, "immersed_star_sign_change", lost is not None, lost, None, f"terminal={run.terminal.kind}")


def _check_convergence(checks: _Checks, runs: Dict[int, SimulatedRun]) -> None:
    reference_n = CONVERGENCE_GRIDS[-1]
    reference = runs[reference_n].final.curve.r
    errors = {}
    for n in CONVERGENCE_GRIDS[:-1]:
        coarse = runs[n].final.curve
        errors[n] = float(np.max(np.abs(resample(coarse.r, reference_n) - reference)))
    ratio = errors[128] / errors[256] if errors[256] > 0.0 else math.inf
    checks.add(
        10,
        "fd2_grid_convergence",
        ratio >= checks.tol["convergence_ratio"],
        ratio,
        checks.tol["convergence_ratio"],
        f"err128={errors[128]:.3e} err256={errors[256]:.3e}",
    )


def _guarded(checks: _Checks, criterion: int, name: str, check: Callable[..., None], *args: Any) -> None:
    """Run one group of checks; an unexpected error becomes a failed check."""

    try:
        check(checks, *args)
    except Exception as exc:
        log_event("verify.error", criterion=criterion, name=name, error=str(exc))
        checks.add(criterion, name, False, None, None, f"error: {exc}")


def _summary(run: SimulatedRun) -> Dict[str, Any]:
    return {
        "terminal": run.terminal.to_dict(),
        "records": len(run.recorder.history),
        "steps": run.final.step_index,
    }


def verify_suite(
    tolerances: Optional[Mapping[str, float]] = None,
    max_workers: int = 4,
) -> Dict[str, Any]:
    """Run every acceptance experiment and return the suite snapshot.

    ``tolerances`` overrides entries of :data:`DEFAULT_TOLERANCES`; unknown
    names are rejected. A failing experiment is reported and the suite
    carries on with the rest.
    """

    merged = dict(DEFAULT_TOLERANCES)
    for name, value in (tolerances or {}).items():
        if name not in merged:
            raise ValueError(f"unknown tolerance {name!r}")
        merged[name] = float(value)

    state = SuiteState()
    checks = _Checks(state, merged)

    jobs: Dict[str, Callable[[], SimulatedRun]] = {}
    for label, curve_id in GAPF_RUNS.items():
        jobs[f"gapf_{label}"] = lambda curve_id=curve_id: simulate(curve_id, 256, "gapf", GAPF_SOLVER)
    jobs["csf_circle"] = lambda: simulate("circle(1)", 128, "csf", CSF_CIRCLE_SOLVER)
    jobs["csf_immersed"] = lambda: simulate("immersed_loops", IMMERSED_POINTS, "csf", IMMERSED_SOLVER)
    for n in CONVERGENCE_GRIDS:
        jobs[f"fd2_{n}"] = lambda n=n: simulate("ellipse(2, 1)", n, "gapf", CONVERGENCE_SOLVER, "fd2")

    runs: Dict[str, SimulatedRun] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {name: pool.submit(job) for name, job in jobs.items()}
        comparisons = [
            pool.submit(_guarded, checks, 6, f"{label}_comparison", _check_comparison, label, GAPF_RUNS[label])
            for label in COMPARE_RUNS
        ]
        for name, future in futures.items():
            try:
                runs[name] = future.result()
            except Exception as exc:
                log_event("verify.error", run=name, error=str(exc))
        for future in comparisons:
            future.result()

    def _need(criterion: int, names: List[str]) -> bool:
        missing = [name for name in names if name not in runs]
        for name in missing:
            checks.add(criterion, f"{name}_run", False, None, None, "la corrida no terminó")
        return not missing

    for label in GAPF_RUNS:
        if _need(3, [f"gapf_{label}"]):
            _guarded(checks, 3, f"{label}_checks", _check_gapf, label, runs[f"gapf_{label}"])
    if _need(7, ["csf_circle"]):
        _guarded(checks, 7, "csf_circle_checks", _check_csf_circle, runs["csf_circle"])
    if _need(9, ["csf_immersed"]):
        _guarded(checks, 9, "immersed_checks", _check_immersed, runs["csf_immersed"])
    grids = [f"fd2_{n}" for n in CONVERGENCE_GRIDS]
    if _need(10, grids):
        _guarded(checks, 10, "fd2_checks", _check_convergence, {n: runs[f"fd2_{n}"] for n in CONVERGENCE_GRIDS})
    for name, run in sorted(runs.items()):
        state.set_run_summary(name, _summary(run))

    snapshot = state.snapshot()
    log_event(
        "verify.summary",
        passed=snapshot["passed"],
        total=snapshot["total"],
        failed=[check["name"] for check in state.failures()],
    )
    return snapshot


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_table(snapshot: Mapping[str, Any]) -> str:
    lines = [f"{'crit':>4}  {'estado':<6}  {'chequeo':<36}  {'observado':>14}  {'umbral':>14}"]
    for check in snapshot["checks"]:
        status = "OK" if check["passed"] else "FALLA"
        lines.append(
            f"{check['criterion']:>4}  {status:<6}  {check['name']:<36}  "
            f"{_fmt(check['observed']):>14}  {_fmt(check['threshold']):>14}"
            + (f"  {check['detail']}" if check["detail"] else "")
        )
    lines.append(f"Total={snapshot['total']} · fallas={snapshot['failed']}")
    return "\n".join(lines)


__all__ = ["DEFAULT_TOLERANCES", "SimulatedRun", "format_table", "simulate", "verify_suite"]
