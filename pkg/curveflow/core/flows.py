"""Right-hand sides of GAPF and CSF in polar and marker form.

The polar equations already absorb the tangential gauge that freezes the
polar angle, alpha = -(beta / r) r_theta. The nonlocal 2*pi/L term is
recomputed from the state passed in on every call.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import BlowUp, GridMismatchError, StarShapeLost
from .geometry import _polar_fields, marker_geometry_points
from .models import FLOW_LAWS, ConsistencyResiduals, MarkerCurve, PolarCurve
from .spatial import diff_periodic, quadrature_periodic

# relaxation rate of the marker spacing (unit diffusion along T)
EQUIDISTRIBUTION_RATE = 1.0


def check_law(law: str) -> str:
    if law not in FLOW_LAWS:
        raise ValueError(f"unknown flow law {law!r}; expected one of {FLOW_LAWS}")
    return law


def normal_speed(kappa: np.ndarray, length: float, law: str) -> np.ndarray:
    """beta = kappa - 2*pi/L for GAPF, beta = kappa for CSF."""

    if check_law(law) == "gapf":
        return kappa - 2.0 * math.pi / length
    return kappa


def polar_rhs_values(
    r: np.ndarray,
    law: str,
    scheme: str = "spectral",
    r_floor: Optional[float] = None,
) -> np.ndarray:
    """dr/dt for raw radial samples; used directly by the integrator stages."""

    check_law(law)
    if not np.all(np.isfinite(r)):
        raise BlowUp("non-finite radial samples")
    r_min = float(np.min(r))
    if r_min <= (r_floor or 0.0):
        raise StarShapeLost(f"radius {r_min:.3e} reached the floor", detail=r_min)

    fields = _polar_fields(r, scheme)
    g2 = fields.g * fields.g
    rhs = fields.r_thetatheta / g2 - 2.0 * fields.r_theta**2 / (r * g2) - r / g2
    if law == "gapf":
        length = quadrature_periodic(fields.g)
        rhs = rhs + 2.0 * math.pi * fields.g / (r * length)
    if not np.all(np.isfinite(rhs)):
        raise BlowUp("non-finite right-hand side", detail=float(np.max(np.abs(fields.kappa))))
    return rhs


def polar_rhs(
    c: PolarCurve,
    law: str,
    scheme: str = "spectral",
    r_floor: Optional[float] = None,
) -> np.ndarray:
    return polar_rhs_values(c.r, law, scheme, r_floor)


def marker_rhs_values(pts: np.ndarray, law: str) -> np.ndarray:
    """Plane velocities beta*N plus the equidistributing tangential term."""

    geo = marker_geometry_points(pts)
    beta = normal_speed(geo.kappa, geo.length, law)

    h_plus = geo.edges
    h_minus = np.roll(h_plus, 1)
    h_mean = 0.5 * (h_plus + h_minus)
    tangential = EQUIDISTRIBUTION_RATE * (h_plus - h_minus) / (h_mean * h_mean)

    velocity = beta[:, None] * geo.normal + tangential[:, None] * geo.tangent
    if not np.all(np.isfinite(velocity)):
        raise BlowUp("non-finite marker velocity", detail=float(np.max(np.abs(geo.kappa))))
    return velocity


def marker_rhs(c: MarkerCurve, law: str) -> np.ndarray:
    return marker_rhs_values(c.pts, law)


def consistency_residuals(
    c_prev: PolarCurve,
    c_next: PolarCurve,
    dt: float,
    law: str,
    scheme: str = "spectral",
) -> ConsistencyResiduals:
    """Compare a step against the curvature and support evolution equations.

    Time differences are taken at fixed theta, so both reference right-hand
    sides carry the gauge transport alpha * f_s. Arclength derivatives use
    d/ds = (1/g) d/dtheta on the midpoint state.
    """

    check_law(law)
    if c_prev.n != c_next.n:
        raise GridMismatchError(f"grid sizes differ: {c_prev.n} vs {c_next.n}")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")

    prev = _polar_fields(c_prev.r, scheme)
    nxt = _polar_fields(c_next.r, scheme)
    p_prev = c_prev.r**2 / prev.g
    p_next = c_next.r**2 / nxt.g

    r = 0.5 * (c_prev.r + c_next.r)
    mid = _polar_fields(r, scheme)
    g, kappa = mid.g, mid.kappa
    p = r * r / g
    length = quadrature_periodic(g)
    beta = normal_speed(kappa, length, law)

    kappa_s = diff_periodic(kappa, 1, scheme) / g
    kappa_ss = diff_periodic(kappa_s, 1, scheme) / g
    p_s = diff_periodic(p, 1, scheme) / g
    p_ss = diff_periodic(p_s, 1, scheme) / g
    x_dot_t = r * mid.r_theta / g
    alpha = -beta * mid.r_theta / r

    rhs_kappa = kappa_ss + kappa * kappa * beta + alpha * kappa_s
    rhs_support = -beta + x_dot_t * kappa_s + alpha * p_s

    return ConsistencyResiduals(
        kappa=float(np.max(np.abs((nxt.kappa - prev.kappa) / dt - rhs_kappa))),
        support=float(np.max(np.abs((p_next - p_prev) / dt - rhs_support))),
        support_slope=float(np.max(np.abs(p_s - kappa * x_dot_t))),
        support_curvature=float(np.max(np.abs(p_ss - (kappa_s * x_dot_t + kappa - kappa * kappa * p)))),
    )


__all__ = [
    "EQUIDISTRIBUTION_RATE",
    "check_law",
    "consistency_residuals",
    "marker_rhs",
    "marker_rhs_values",
    "normal_speed",
    "polar_rhs",
    "polar_rhs_values",
]
