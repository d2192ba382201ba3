"""Exception hierarchy shared by the solver and the harness."""

from __future__ import annotations

from typing import Optional


class CurveFlowError(Exception):
    """Base class for every error raised by curveflow."""


class InvalidCurveError(CurveFlowError, ValueError):
    """A curve violates the invariants of its representation."""


class GridMismatchError(CurveFlowError, ValueError):
    """Two sample sets that must share a grid do not."""


class SolverEvent(CurveFlowError):
    """Terminal condition detected while advancing a flow.

    ``evolve`` turns these into terminal events instead of letting them escape.
    """

    kind = "SolverEvent"

    def __init__(self, message: str, t: Optional[float] = None, detail: float = float("nan")):
        super().__init__(message)
        self.t = t
        self.detail = float(detail)


class StarShapeLost(SolverEvent):
    """The radial function reached the configured floor."""

    kind = "StarShapeLost"


class BlowUp(SolverEvent):
    """Curvature escaped the ceiling or the state stopped being finite."""

    kind = "BlowUp"


class DecayFitRefused(CurveFlowError, ValueError):
    """The fitted field already sits at the noise floor inside the window."""


class ScenarioError(CurveFlowError, ValueError):
    """Invalid scenario configuration or an output path that cannot be written."""


__all__ = [
    "BlowUp",
    "CurveFlowError",
    "DecayFitRefused",
    "GridMismatchError",
    "InvalidCurveError",
    "ScenarioError",
    "SolverEvent",
    "StarShapeLost",
]
