"""Geometric quantities of discrete curves in polar and marker form.

Sign conventions are shared by both backends: curves run counterclockwise,
N is the inward normal (T rotated by +90 degrees) and convex curves have
positive curvature. Star-shapedness is always measured about the origin.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from .errors import BlowUp, InvalidCurveError
from .models import (
    EDGE_TOLERANCE,
    GeometryFields,
    MarkerCurve,
    MarkerGeometry,
    PolarCurve,
    _shoelace,
)
from .spatial import derivatives, quadrature_periodic


def _polar_fields(r: np.ndarray, scheme: str) -> GeometryFields:
    r_theta, r_thetatheta = derivatives(r, scheme)
    g = np.sqrt(r * r + r_theta * r_theta)
    kappa = (-r * r_thetatheta + 2.0 * r_theta * r_theta + r * r) / g**3
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(kappa))):
        raise BlowUp("non-finite metric or curvature samples", detail=float("nan"))
    return GeometryFields(g=g, kappa=kappa, r_theta=r_theta, r_thetatheta=r_thetatheta)


def metric_and_curvature(c: PolarCurve, scheme: str = "spectral") -> GeometryFields:
    """g = sqrt(r^2 + r_theta^2) and kappa = (-r r_tt + 2 r_t^2 + r^2) / g^3."""

    return _polar_fields(c.r, scheme)


def support(c: PolarCurve, scheme: str = "spectral") -> np.ndarray:
    """Support function p = -<X, N> = r^2 / g about the origin."""

    fields = metric_and_curvature(c, scheme)
    return c.r * c.r / fields.g


def polar_geometry(c: PolarCurve, scheme: str = "spectral") -> GeometryFields:
    """Metric, curvature and support in one pass."""

    fields = metric_and_curvature(c, scheme)
    return GeometryFields(
        g=fields.g,
        kappa=fields.kappa,
        r_theta=fields.r_theta,
        r_thetatheta=fields.r_thetatheta,
        p=c.r * c.r / fields.g,
    )


def length_area(c: PolarCurve, scheme: str = "spectral") -> Tuple[float, float]:
    fields = metric_and_curvature(c, scheme)
    return quadrature_periodic(fields.g), 0.5 * quadrature_periodic(c.r * c.r)


def symmetry_defect(c: PolarCurve) -> float:
    """max_j |r(theta_j + pi) - r(theta_j)|; zero for centrosymmetric samples."""

    if c.n % 2:
        raise InvalidCurveError("symmetry defect needs an even grid")
    return float(np.max(np.abs(np.roll(c.r, -(c.n // 2)) - c.r)))


def to_marker(c: PolarCurve) -> MarkerCurve:
    theta = c.theta
    return MarkerCurve(np.column_stack((c.r * np.cos(theta), c.r * np.sin(theta))))


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def marker_geometry(c: MarkerCurve) -> MarkerGeometry:
    """Discrete frame, curvature and star test of a closed polyline.

    Derivatives are second-order central differences in the arclength
    parameter on the (generally non-uniform) polygon spacing.
    """

    return marker_geometry_points(c.pts)


def marker_geometry_points(pts: np.ndarray) -> MarkerGeometry:
    """Same as :func:`marker_geometry` on a raw (m, 2) array, order kept as given."""

    if not np.all(np.isfinite(pts)):
        raise BlowUp("non-finite marker positions")
    forward = np.roll(pts, -1, axis=0) - pts
    backward = pts - np.roll(pts, 1, axis=0)
    h_plus = np.linalg.norm(forward, axis=1)
    h_minus = np.linalg.norm(backward, axis=1)

    diameter = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if float(h_plus.min()) <= EDGE_TOLERANCE * diameter:
        raise InvalidCurveError("degenerate marker edge")

    hp = h_plus[:, None]
    hm = h_minus[:, None]
    denom = hp * hm * (hp + hm)
    x_s = (hm * hm * forward + hp * hp * backward) / denom
    x_ss = 2.0 * (hm * forward - hp * backward) / denom

    speed = np.linalg.norm(x_s, axis=1)
    tangent = x_s / speed[:, None]
    normal = np.column_stack((-tangent[:, 1], tangent[:, 0]))
    kappa = _cross(x_s, x_ss) / speed**3
    det = _cross(pts, tangent)

    length = float(np.sum(h_plus))
    return MarkerGeometry(
        tangent=tangent,
        normal=normal,
        kappa=kappa,
        weight=0.5 * (h_plus + h_minus),
        edges=h_plus,
        det=det,
        length=length,
        area=_shoelace(pts),
        star_min=float(det.min()),
    )


def marker_turning_number(c: MarkerCurve) -> float:
    """Total rotation of the edge directions divided by 2*pi."""

    edges = np.roll(c.pts, -1, axis=0) - c.pts
    angles = np.arctan2(edges[:, 1], edges[:, 0])
    turns = np.diff(np.concatenate((angles, angles[:1])))
    turns = (turns + math.pi) % (2.0 * math.pi) - math.pi
    return float(np.sum(turns)) / (2.0 * math.pi)


__all__ = [
    "length_area",
    "marker_geometry",
    "marker_geometry_points",
    "marker_turning_number",
    "metric_and_curvature",
    "polar_geometry",
    "support",
    "symmetry_defect",
    "to_marker",
]
