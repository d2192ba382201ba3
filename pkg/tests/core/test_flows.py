import math

import numpy as np
import pytest

from curveflow.core.diagnostics import record
from curveflow.core.errors import GridMismatchError, StarShapeLost
from curveflow.core.flows import (
    consistency_residuals,
    marker_rhs,
    normal_speed,
    polar_rhs,
)
from curveflow.core.geometry import marker_geometry, metric_and_curvature, to_marker
from curveflow.core.integrators import step
from curveflow.core.models import FlowState, MarkerCurve, PolarCurve, StepperConfig
from curveflow.core.spatial import diff_periodic, quadrature_periodic
from curveflow.initial_curves import build_initial


def _regular_polygon(m):
    phi = 2.0 * math.pi * np.arange(m) / m
    return MarkerCurve(np.column_stack((np.cos(phi), np.sin(phi))))


def _length_rate(curve, rhs):
    fields = metric_and_curvature(curve)
    rhs_theta = diff_periodic(rhs, 1)
    return quadrature_periodic((curve.r * rhs + fields.r_theta * rhs_theta) / fields.g)


def test_circle_right_hand_sides():
    circle = PolarCurve(np.full(64, 2.0))

    assert np.max(np.abs(polar_rhs(circle, "gapf"))) < 1e-13
    assert np.allclose(polar_rhs(circle, "csf"), -0.5, atol=1e-13)


def test_normal_speed_subtracts_the_mean_curvature_for_gapf():
    kappa = np.array([1.0, 2.0, 3.0])

    assert normal_speed(kappa, 2.0 * math.pi, "gapf") == pytest.approx([0.0, 1.0, 2.0])
    assert normal_speed(kappa, 2.0 * math.pi, "csf") == pytest.approx([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        normal_speed(kappa, 1.0, "willmore")


def test_gapf_rhs_is_spectrally_accurate():
    coarse = PolarCurve.from_function(lambda theta: 1.0 + 0.1 * np.cos(2 * theta), 256)
    fine = PolarCurve.from_function(lambda theta: 1.0 + 0.1 * np.cos(2 * theta), 4096)

    difference = polar_rhs(coarse, "gapf") - polar_rhs(fine, "gapf")[::16]

    assert np.max(np.abs(difference)) < 1e-8


@pytest.mark.parametrize("curve_id", ["ellipse(2, 1)", "cos_star(1, 0.25, 2)", "offset_star(1, 0.2, 2, 0.1)"])
def test_gapf_preserves_area_and_shortens_length(curve_id):
    curve = build_initial(curve_id, 256)
    area = 0.5 * quadrature_periodic(curve.r**2)

    rhs = polar_rhs(curve, "gapf")
    entry = record(FlowState(curve), "gapf")

    assert abs(quadrature_periodic(curve.r * rhs)) < 1e-8 * area
    assert _length_rate(curve, rhs) == pytest.approx(-entry.q2, rel=1e-6)


def test_csf_area_rate_is_minus_two_pi():
    curve = build_initial("ellipse(2, 1)", 256)

    rhs = polar_rhs(curve, "csf")

    assert quadrature_periodic(curve.r * rhs) == pytest.approx(-2.0 * math.pi, rel=1e-8)


def test_centrosymmetric_data_keeps_a_centrosymmetric_velocity():
    curve = build_initial("cos_star(1, 0.25, 2)", 128)

    rhs = polar_rhs(curve, "gapf")

    assert np.allclose(np.roll(rhs, 64), rhs, atol=1e-13)


def test_rhs_refuses_radii_at_the_floor():
    curve = PolarCurve(np.full(32, 0.5))

    with pytest.raises(StarShapeLost):
        polar_rhs(curve, "csf", r_floor=0.5)


def test_regular_polygon_marker_velocity():
    polygon = _regular_polygon(512)

    csf = marker_rhs(polygon, "csf")
    gapf = marker_rhs(polygon, "gapf")

    # CSF moves each vertex inward with unit speed, GAPF barely moves it
    assert np.max(np.abs(np.linalg.norm(csf, axis=1) - 1.0)) < 1e-3
    assert np.allclose(csf / np.linalg.norm(csf, axis=1)[:, None], -polygon.pts, atol=1e-9)
    assert np.max(np.linalg.norm(gapf, axis=1)) < 1e-3


def test_marker_gapf_normal_velocity_mean_matches_discrete_turning_gap():
    gaps = []
    for m in (256, 512, 1024):
        markers = to_marker(build_initial("ellipse(2, 1)", m))
        velocity = marker_rhs(markers, "gapf")
        geo = marker_geometry(markers)

        normal_part = np.einsum("ij,ij->i", velocity, geo.normal)
        mean_speed = float(np.sum(normal_part * geo.weight))
        total_curvature = float(np.sum(geo.kappa * geo.weight))
        # the discrete mean of kappa - 2 pi / L is the turning defect of the polygon
        assert mean_speed == pytest.approx(total_curvature - 2.0 * math.pi, abs=1e-10)
        gaps.append(abs(mean_speed))

    assert gaps[-1] < 5e-4
    for coarse, fine in zip(gaps, gaps[1:]):
        assert 3.5 < coarse / fine < 4.5


def test_marker_tangential_term_spreads_uneven_spacing():
    phi = 2.0 * math.pi * np.arange(64) / 64
    phi = phi + 0.02 * np.sin(phi)
    markers = MarkerCurve(np.column_stack((np.cos(phi), np.sin(phi))))

    velocity = marker_rhs(markers, "csf")
    geo = marker_geometry(markers)

    tangential = np.einsum("ij,ij->i", velocity, geo.tangent)
    assert np.max(np.abs(tangential)) > 1e-3

    regular = _regular_polygon(64)
    even = np.einsum("ij,ij->i", marker_rhs(regular, "csf"), marker_geometry(regular).tangent)
    assert np.max(np.abs(even)) < 1e-9


def test_consistency_residuals_vanish_on_a_static_circle():
    circle = PolarCurve(np.ones(64))

    residuals = consistency_residuals(circle, circle, 1e-3, "gapf")

    assert residuals.kappa < 1e-10
    assert residuals.support < 1e-10
    assert residuals.support_slope < 1e-10
    assert residuals.support_curvature < 1e-10


@pytest.mark.parametrize("law", ["gapf", "csf"])
def test_consistency_residuals_on_an_ellipse_step(law):
    ellipse = build_initial("ellipse(2, 1)", 256)
    cfg = StepperConfig()
    dt = 1e-5

    after = step(FlowState(ellipse), law, dt, cfg)
    residuals = consistency_residuals(ellipse, after.curve, dt, law)

    assert residuals.kappa < 1e-2
    assert residuals.support < 1e-2
    assert residuals.support_slope < 1e-8
    assert residuals.support_curvature < 1e-6


def test_curvature_residual_shrinks_with_the_step():
    ellipse = build_initial("ellipse(2, 1)", 256)
    cfg = StepperConfig()

    def kappa_residual(dt):
        after = step(FlowState(ellipse), "gapf", dt, cfg)
        return consistency_residuals(ellipse, after.curve, dt, "gapf").kappa

    coarse, fine = kappa_residual(1e-5), kappa_residual(5e-6)

    assert coarse < 1e-5
    assert 1.5 < coarse / fine < 3.0


def test_support_identities_hold_on_a_star():
    star = build_initial("cos_star(1, 0.25, 2)", 256)

    residuals = consistency_residuals(star, star, 1.0, "gapf")

    assert residuals.support_slope < 1e-8
    assert residuals.support_curvature < 1e-6


def test_consistency_residuals_validate_their_inputs():
    with pytest.raises(GridMismatchError):
        consistency_residuals(PolarCurve(np.ones(32)), PolarCurve(np.ones(64)), 1e-3, "gapf")
    with pytest.raises(ValueError):
        consistency_residuals(PolarCurve(np.ones(32)), PolarCurve(np.ones(32)), 0.0, "gapf")
