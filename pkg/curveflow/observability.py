"""Observability helpers for curveflow.

Structured JSON logging for runs and verification checks, per-run counters
kept under a module lock, and a Prometheus text export of those counters.
Log output never feeds back into numerical results.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Union

from prometheus_client import CollectorRegistry, Gauge, write_to_textfile

LOGGER_NAME = "curveflow"
LOG_LEVEL_ENV = "CURVEFLOW_LOG_LEVEL"


class _JsonFormatter(logging.Formatter):
    """Formatter that serialises the log record as JSON."""

    def format(self, record: logging.LogRecord) -> str:  # pragma: no cover - small wrapper
        base = {
            "level": record.levelname,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(record.created)),
            "event": getattr(record, "event", record.msg if isinstance(record.msg, str) else "message"),
        }

        message_payload = {}
        if isinstance(record.msg, dict):
            message_payload = record.msg
        else:
            base["message"] = record.getMessage()

        base.update(message_payload)
        if record.exc_info:
            base["exception"] = self.formatException(record.exc_info)
        return json.dumps(base, ensure_ascii=False, default=str)


_LOGGER = logging.getLogger(LOGGER_NAME)
_LOGGER.setLevel(os.getenv(LOG_LEVEL_ENV, "INFO").strip().upper() or "INFO")
if not _LOGGER.handlers:
    handler = logging.StreamHandler()
    handler.setFormatter(_JsonFormatter())
    _LOGGER.addHandler(handler)
    _LOGGER.propagate = False


def set_log_level(level: Union[int, str]) -> None:
    if isinstance(level, str):
        level = level.strip().upper()
    _LOGGER.setLevel(level)


def log_event(event: str, level: int = logging.INFO, **payload) -> None:
    """Emit a structured log entry."""

    payload = {"event": event, **payload}
    _LOGGER.log(level, payload)


@dataclass
class RunMetrics:
    steps: int = 0
    records: int = 0
    events: int = 0
    last_dt: float = 0.0
    last_t: float = 0.0
    wall_seconds: float = 0.0
    terminal: Optional[str] = None


_METRICS_LOCK = threading.Lock()
_RUN_METRICS: Dict[str, RunMetrics] = {}


def _get_metrics_locked(run: str) -> RunMetrics:
    return _RUN_METRICS.setdefault(run, RunMetrics())


def record_checkpoint(run: str, t: float) -> None:
    with _METRICS_LOCK:
        metrics = _get_metrics_locked(run)
        metrics.records += 1
        metrics.last_t = float(t)
    log_event("run.checkpoint", level=logging.DEBUG, run=run, t=t)


def record_run_event(run: str, kind: str, t: float, terminal: bool) -> None:
    with _METRICS_LOCK:
        metrics = _get_metrics_locked(run)
        metrics.events += 1
        if terminal:
            metrics.terminal = kind
    log_event("run.event", run=run, kind=kind, t=t, terminal=terminal)


def record_run_finish(run: str, steps: int, last_t: float, last_dt: float, wall_seconds: float) -> None:
    with _METRICS_LOCK:
        metrics = _get_metrics_locked(run)
        metrics.steps = int(steps)
        metrics.last_t = float(last_t)
        metrics.last_dt = float(last_dt)
        metrics.wall_seconds = float(wall_seconds)


def metrics_snapshot() -> Dict[str, Dict]:
    with _METRICS_LOCK:
        return {name: asdict(metrics) for name, metrics in _RUN_METRICS.items()}


def export_metrics(path: Union[str, Path], runs: Optional[Dict[str, Dict]] = None) -> Path:
    """Write the per-run counters as Prometheus gauges in text format."""

    runs = metrics_snapshot() if runs is None else runs
    registry = CollectorRegistry()
    gauges = {
        "steps": Gauge("curveflow_run_steps", "Accepted time steps of the run", ["run"], registry=registry),
        "records": Gauge("curveflow_run_records", "Diagnostic records written by the run", ["run"], registry=registry),
        "events": Gauge("curveflow_run_events", "Events emitted by the run", ["run"], registry=registry),
        "last_dt": Gauge("curveflow_run_last_dt", "Stable time step at the final state", ["run"], registry=registry),
        "last_t": Gauge("curveflow_run_last_t", "Flow time of the final state", ["run"], registry=registry),
        "wall_seconds": Gauge("curveflow_run_wall_seconds", "Wall-clock duration of the run", ["run"], registry=registry),
    }
    for run, values in sorted(runs.items()):
        for name, gauge in gauges.items():
            gauge.labels(run=run).set(float(values.get(name) or 0.0))

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(target), registry)
    log_event("output.written", kind="metrics", path=str(target))
    return target


def reset_all_states() -> None:
    """Utility for tests: drop every run's counters."""

    with _METRICS_LOCK:
        _RUN_METRICS.clear()


__all__ = [
    "LOGGER_NAME",
    "RunMetrics",
    "export_metrics",
    "log_event",
    "metrics_snapshot",
    "record_checkpoint",
    "record_run_event",
    "record_run_finish",
    "reset_all_states",
    "set_log_level",
]
