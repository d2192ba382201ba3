"""Scenario execution: initial curve, evolve, analysis, result files."""

from __future__ import annotations

import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..config_store import ScenarioConfig, apply_overrides, build_scenario_config, ensure_writable, read_scenario_file
from ..core.diagnostics import Recorder, check_bounds, compare_gapf_csf, decay_fit
from ..core.errors import DecayFitRefused, InvalidCurveError, ScenarioError
from ..core.geometry import to_marker
from ..core.integrators import evolve, resolve_stepper_config, stable_dt
from ..core.models import (
    CSV_VERSION,
    EVENT_CONVEXITY,
    Curve,
    DiagRecord,
    Event,
    FlowState,
    MarkerCurve,
    PolarCurve,
)
from ..initial_curves import build_initial, read_samples
from ..observability import (
    export_metrics,
    log_event,
    metrics_snapshot,
    record_checkpoint,
    record_run_event,
    record_run_finish,
)
from ..outputs import write_csv, write_frames, write_report


@dataclass
class RunOutcome:
    config: ScenarioConfig
    report: Dict[str, Any]
    history: List[DiagRecord]
    events: List[Event]
    final: FlowState
    files: Dict[str, str] = field(default_factory=dict)

    @property
    def terminal(self) -> Event:
        return self.events[-1]


def load_initial_curve(cfg: ScenarioConfig) -> Curve:
    """Builtin curve or sample file, converted to the scenario's backend."""

    try:
        if cfg.curve_file is None:
            return build_initial(cfg.initial, cfg.size, cfg.backend)
        curve = read_samples(cfg.curve_file)
    except OSError as exc:
        raise ScenarioError(f"No se pudo leer la curva {cfg.curve_file}: {exc}") from exc
    except InvalidCurveError as exc:
        raise ScenarioError(f"Curva inicial inválida: {exc}") from exc
    if isinstance(curve, PolarCurve) and cfg.backend == "marker":
        return to_marker(curve)
    if isinstance(curve, MarkerCurve) and cfg.backend == "polar":
        raise ScenarioError("Una curva de marcadores no puede correr con backend polar")
    return curve


def auto_decay_window(history: Sequence[DiagRecord], events: Sequence[Event]) -> Optional[tuple]:
    """Second half of the interval between ConvexityReached and the last record."""

    convex = next((event.t_event for event in events if event.kind == EVENT_CONVEXITY), None)
    if convex is None or not history:
        return None
    t_last = history[-1].t
    if not t_last > convex:
        return None
    return convex + 0.5 * (t_last - convex), t_last


def _decay_summary(cfg: ScenarioConfig, history: Sequence[DiagRecord], events: Sequence[Event]) -> Dict[str, Any]:
    window = cfg.analysis.decay_window or auto_decay_window(history, events)
    if window is None:
        return {"field": cfg.analysis.decay_field, "refused": "sin ventana de ajuste"}
    try:
        fit = decay_fit(history, cfg.analysis.decay_field, window)
    except (DecayFitRefused, ValueError) as exc:
        return {"field": cfg.analysis.decay_field, "window": list(window), "refused": str(exc)}
    summary = fit.to_dict()
    length0 = history[0].L
    summary["reference_rate"] = -((2.0 * math.pi / length0) ** 2)
    return summary


def build_report(
    cfg: ScenarioConfig,
    recorder: Recorder,
    events: Sequence[Event],
    final: FlowState,
    initial: Curve,
) -> Dict[str, Any]:
    history = recorder.history
    first = history[0]
    report: Dict[str, Any] = {
        "name": cfg.name,
        "csv_version": CSV_VERSION,
        "config": cfg.to_dict(),
        "initial": {"A0": first.A, "L0": first.L, "kappa_min": first.kappa_min, "kappa_max": first.kappa_max},
        "terminal": events[-1].to_dict(),
        "events": [event.to_dict() for event in events],
        "records": len(history),
        "steps": final.step_index,
        "final_t": final.t,
        "area_drift": max(abs(entry.A - first.A) for entry in history) / first.A,
        "length_identity_residual": recorder.length_identity_residual(),
        "final": history[-1].to_dict(),
    }

    if cfg.law == "gapf" and cfg.analysis.bounds:
        report["bounds"] = check_bounds(history, first).to_dict()
    if cfg.law == "gapf":
        report["decay_fit"] = _decay_summary(cfg, history, events)
    else:
        convex = next((event.t_event for event in events if event.kind == EVENT_CONVEXITY), None)
        report["csf"] = {"convexity_t": convex, "extinction_estimate": first.A / (2.0 * math.pi)}
    if cfg.backend == "marker":
        report["marker"] = {
            "star_min_initial": first.p_min,
            "star_lost_t": recorder.first_time(lambda entry: entry.p_min <= 0.0),
            "total_curvature_initial": first.total_curvature,
        }
    if cfg.analysis.compare:
        report["comparison"] = compare_gapf_csf(initial, cfg.solver, cfg.scheme).to_dict()
    return report


def run_scenario(cfg: ScenarioConfig, out_dir: Path) -> RunOutcome:
    """Run one scenario and write its CSV, frames, report and metrics under ``out_dir``.

    Solver terminal conditions are results, recorded as the report's
    terminal event. Configuration and IO problems raise :class:`ScenarioError`.
    """

    out_dir = ensure_writable(Path(out_dir))
    initial = load_initial_curve(cfg)
    solver = resolve_stepper_config(cfg.solver, initial, cfg.scheme)
    log_event(
        "run.start",
        run=cfg.name,
        law=cfg.law,
        backend=cfg.backend,
        scheme=cfg.scheme,
        size=cfg.size,
        t_end=solver.t_end,
    )

    started = time.perf_counter()
    recorder = Recorder(
        cfg.law,
        cfg.scheme,
        keep_curves=bool(cfg.outputs.frames),
        on_record=lambda entry: record_checkpoint(cfg.name, entry.t),
    )
    final, events = evolve(FlowState(initial), cfg.law, solver, cfg.scheme, recorder)
    for event in events:
        record_run_event(cfg.name, event.kind, event.t_event, event.terminal)
    record_run_finish(
        cfg.name,
        steps=final.step_index,
        last_t=final.t,
        last_dt=stable_dt(final, solver, cfg.scheme),
        wall_seconds=time.perf_counter() - started,
    )

    report = build_report(cfg, recorder, events, final, initial)
    files: Dict[str, str] = {}
    if cfg.outputs.csv:
        files["csv"] = str(write_csv(out_dir / cfg.outputs.csv, recorder.history))
    if cfg.outputs.frames:
        frames = write_frames(out_dir / cfg.outputs.frames, recorder.curves, [entry.t for entry in recorder.history])
        files["frames"] = str(out_dir / cfg.outputs.frames)
        report["frames"] = len(frames)
    if cfg.outputs.metrics:
        runs = {cfg.name: metrics_snapshot().get(cfg.name, {})}
        files["metrics"] = str(export_metrics(out_dir / cfg.outputs.metrics, runs))
    if cfg.outputs.report:
        files["report"] = str(write_report(out_dir / cfg.outputs.report, report))

    log_event(
        "run.finish",
        run=cfg.name,
        terminal=events[-1].kind,
        t=final.t,
        steps=final.step_index,
        records=len(recorder.history),
    )
    return RunOutcome(
        config=cfg,
        report=report,
        history=list(recorder.history),
        events=list(events),
        final=final,
        files=files,
    )


def _subdir_name(key: str, value: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", f"{key}={value}")


def sweep(
    scenario_path: Path,
    key: str,
    values: Sequence[str],
    out_dir: Path,
    max_workers: Optional[int] = None,
) -> List[Dict[str, Any]]:
    """Run one scenario per value of ``key`` concurrently, each in its own subdirectory."""

    if not values:
        raise ScenarioError("El barrido necesita al menos un valor")
    scenario_path = Path(scenario_path)
    raw = read_scenario_file(scenario_path)
    out_dir = ensure_writable(Path(out_dir))

    configs = []
    for value in values:
        patched = apply_overrides(raw, {key: value})
        base_name = patched.get("scenario", {}).get("name") or scenario_path.stem
        patched = apply_overrides(patched, {"scenario.name": f"{base_name}[{key}={value}]"})
        configs.append((value, build_scenario_config(patched, base_dir=scenario_path.parent)))

    def _run(item):
        value, cfg = item
        outcome = run_scenario(cfg, out_dir / _subdir_name(key, value))
        log_event("sweep.value", key=key, value=value, terminal=outcome.terminal.kind, t=outcome.final.t)
        return {
            "value": value,
            "name": cfg.name,
            "terminal": outcome.terminal.to_dict(),
            "final_t": outcome.final.t,
            "steps": outcome.final.step_index,
            "area_drift": outcome.report["area_drift"],
            "files": outcome.files,
        }

    with ThreadPoolExecutor(max_workers=max_workers or min(4, len(configs))) as pool:
        results = list(pool.map(_run, configs))

    write_report(out_dir / "sweep_summary.json", {"parameter": key, "runs": results})
    return results


__all__ = ["RunOutcome", "auto_decay_window", "build_report", "load_initial_curve", "run_scenario", "sweep"]
