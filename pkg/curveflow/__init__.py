"""Curve flow simulator for the area-preserving curvature flow (GAPF) and curve shortening flow.

Star-shaped closed plane curves are evolved in polar form (r(theta, t) on a
fixed angular grid) or as marker polygons, with diagnostics for the
conserved and monotone quantities of both flows.
"""

from .core import *
from .config_store import ScenarioConfig, apply_overrides, build_scenario_config, load_scenario
from .initial_curves import build_initial, parse_curve_id, read_samples
from .observability import log_event

__version__ = "0.1.0"
