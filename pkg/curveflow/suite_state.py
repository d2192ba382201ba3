"""Thread-safe collector of verification results and run summaries."""

from __future__ import annotations

import copy
import threading
from typing import Any, Dict, List, Optional


class SuiteState:
    """Encapsulates results reported by concurrent scenario runs behind a single lock."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._checks: List[Dict[str, Any]] = []
        self._runs: Dict[str, Dict[str, Any]] = {}

    def add_check(
        self,
        *,
        criterion: int,
        name: str,
        passed: bool,
        observed: Any,
        threshold: Any,
        detail: Optional[str] = None,
    ) -> None:
        entry = {
            "criterion": int(criterion),
            "name": name,
            "passed": bool(passed),
            "observed": observed,
            "threshold": threshold,
            "detail": detail or "",
        }
        with self._lock:
            self._checks.append(entry)

    def set_run_summary(self, run: str, summary: Dict[str, Any]) -> None:
        with self._lock:
            self._runs[run] = copy.deepcopy(summary)

    def failures(self) -> List[Dict[str, Any]]:
        with self._lock:
            return [copy.deepcopy(check) for check in self._checks if not check["passed"]]

    def snapshot(self) -> Dict[str, Any]:
        with self._lock:
            checks = sorted(copy.deepcopy(self._checks), key=lambda item: (item["criterion"], item["name"]))
            return {
                "passed": all(check["passed"] for check in checks),
                "total": len(checks),
                "failed": sum(1 for check in checks if not check["passed"]),
                "checks": checks,
                "runs": copy.deepcopy(self._runs),
            }


__all__ = ["SuiteState"]
