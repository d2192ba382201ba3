"""Run orchestration: scenario runs, sweeps and the acceptance suite."""

from .runner import RunOutcome, run_scenario, sweep
from .verify import format_table, verify_suite

__all__ = ["RunOutcome", "format_table", "run_scenario", "sweep", "verify_suite"]
