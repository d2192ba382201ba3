import math

import numpy as np
import pytest

from curveflow.core.integrators import (
    evolve,
    record_times,
    resolve_stepper_config,
    roundness,
    stable_dt,
    step,
)
from curveflow.core.models import (
    EVENT_BLOW_UP,
    EVENT_CONVERGED,
    EVENT_CONVEXITY,
    EVENT_STAR_LOST,
    EVENT_TIME_LIMIT,
    FlowState,
    MarkerCurve,
    PolarCurve,
    StepperConfig,
)
from curveflow.initial_curves import build_initial


def _regular_polygon(m):
    phi = 2.0 * math.pi * np.arange(m) / m
    return MarkerCurve(np.column_stack((np.cos(phi), np.sin(phi))))


class _States:
    def __init__(self):
        self.states = []

    def __call__(self, state):
        self.states.append(state)

    @property
    def times(self):
        return [state.t for state in self.states]


def test_stable_dt_example_and_grid_scaling():
    cfg = StepperConfig(cfl=0.5, dt_max=1.0)

    coarse = stable_dt(FlowState(PolarCurve(np.ones(64))), cfg)
    fine = stable_dt(FlowState(PolarCurve(np.ones(128))), cfg)

    assert coarse == pytest.approx(0.5 * (2.0 * math.pi / 64) ** 2 / 2.0, rel=1e-12)
    assert fine == pytest.approx(coarse / 4.0, rel=1e-12)
    assert stable_dt(FlowState(PolarCurve(np.ones(64))), StepperConfig(dt_max=1e-4)) == 1e-4


def test_stable_dt_on_markers_uses_the_shortest_edge():
    polygon = _regular_polygon(64)
    edge = 2.0 * math.sin(math.pi / 64)

    assert stable_dt(FlowState(polygon), StepperConfig(cfl=0.4, dt_max=1.0)) == pytest.approx(
        0.4 * edge * edge / 2.0, rel=1e-12
    )


def test_curve_relative_defaults_are_resolved():
    circle = PolarCurve(np.full(64, 2.0))

    cfg = resolve_stepper_config(StepperConfig(), circle)

    assert cfg.tol_convex == pytest.approx(5e-4, rel=1e-12)
    assert cfg.r_floor == pytest.approx(2e-6, rel=1e-12)
    assert cfg.kappa_ceiling == pytest.approx(50.0, rel=1e-12)
    explicit = StepperConfig(r_floor=0.1, kappa_ceiling=7.0, tol_convex=1e-2)
    assert resolve_stepper_config(explicit, circle) == explicit


def test_record_times_share_the_checkpoint_grid():
    times = record_times(StepperConfig(t_end=0.75, record_count=200))

    assert len(times) == 201
    assert times[0] == 0.0
    assert times[100] == 0.375
    assert times[-1] == 0.75
    with pytest.raises(ValueError):
        record_times(StepperConfig(t_end=1.0), t_start=1.0)


def test_roundness_is_zero_on_the_matching_circle():
    assert roundness(np.full(32, 0.5), 4.0 * math.pi) == pytest.approx(0.0, abs=1e-15)
    assert roundness(np.array([0.5, 0.6]), 4.0 * math.pi) == pytest.approx(0.2, rel=1e-12)


def test_step_keeps_the_gapf_circle_fixed():
    circle = PolarCurve(np.full(64, 1.5))

    after = step(FlowState(circle), "gapf", 1e-3, StepperConfig())

    assert after.t == 1e-3
    assert after.step_index == 1
    assert np.allclose(after.curve.r, 1.5, rtol=1e-14, atol=0.0)


def test_step_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        step(FlowState(PolarCurve(np.ones(32))), "csf", 0.0, StepperConfig())


@pytest.mark.parametrize("stepper,low,high", [("rk4", 24.0, 40.0), ("ssprk3", 12.0, 20.0)])
def test_step_order_from_step_doubling(stepper, low, high):
    circle = FlowState(PolarCurve(np.ones(16)))
    cfg = StepperConfig(stepper=stepper)

    def doubling_gap(dt):
        full = step(circle, "csf", dt, cfg)
        half = step(step(circle, "csf", dt / 2, cfg), "csf", dt / 2, cfg)
        return abs(float(full.curve.r[0]) - float(half.curve.r[0]))

    ratio = doubling_gap(0.02) / doubling_gap(0.01)

    assert low < ratio < high


def test_marker_step_shrinks_a_polygon_under_csf():
    polygon = _regular_polygon(128)
    area0 = 0.5 * float(np.sum(polygon.pts[:, 0] * np.roll(polygon.pts[:, 1], -1)
                               - np.roll(polygon.pts[:, 0], -1) * polygon.pts[:, 1]))
    dt = 1e-4

    after = step(FlowState(polygon), "csf", dt, StepperConfig())
    pts = after.curve.pts
    area1 = 0.5 * float(np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1]))

    assert (area1 - area0) / dt == pytest.approx(-2.0 * math.pi, rel=1e-2)


def test_gapf_circle_runs_to_the_time_limit_unchanged():
    circle = PolarCurve(np.ones(32))
    recorder = _States()

    final, events = evolve(FlowState(circle), "gapf", StepperConfig(t_end=0.1, record_count=10), recorder=recorder)

    assert [event.kind for event in events] == [EVENT_CONVEXITY, EVENT_TIME_LIMIT]
    assert events[0].t_event == 0.0
    assert final.t == pytest.approx(0.1, abs=1e-15)
    assert np.allclose(final.curve.r, 1.0, rtol=1e-12, atol=0.0)
    assert recorder.times == record_times(StepperConfig(t_end=0.1, record_count=10))


def test_csf_circle_shrinks_like_the_exact_solution_and_blows_up():
    circle = PolarCurve(np.ones(32))
    recorder = _States()

    final, events = evolve(
        FlowState(circle),
        "csf",
        StepperConfig(t_end=0.75, record_count=200),
        recorder=recorder,
    )

    at_probe = next(state for state in recorder.states if state.t == 0.375)
    assert np.max(np.abs(at_probe.curve.r - 0.5)) < 1e-6

    terminal = events[-1]
    assert terminal.kind == EVENT_BLOW_UP
    assert terminal.t_event == pytest.approx(0.5, abs=1e-3)
    assert sum(1 for event in events if event.terminal) == 1
    # the last accepted state is recorded even though it is off the checkpoint grid
    assert recorder.states[-1] is final
    assert final.t not in record_times(StepperConfig(t_end=0.75, record_count=200))


def test_radius_floor_stops_a_shrinking_circle():
    circle = PolarCurve(np.ones(64))

    _, events = evolve(FlowState(circle), "csf", StepperConfig(t_end=1.0, r_floor=0.9))

    assert events[-1].kind == EVENT_STAR_LOST
    assert events[-1].t_event == pytest.approx((1.0 - 0.81) / 2.0, abs=2e-3)


def test_curvature_ceiling_reports_blow_up():
    circle = PolarCurve(np.ones(32))

    _, events = evolve(FlowState(circle), "csf", StepperConfig(t_end=1.0, kappa_ceiling=2.0))

    assert events[-1].kind == EVENT_BLOW_UP
    assert events[-1].t_event == pytest.approx(0.375, abs=3e-3)
    assert events[-1].detail > 2.0


@pytest.mark.integration
def test_gapf_ellipse_converges_to_the_circle_of_equal_area():
    ellipse = build_initial("ellipse(2, 1)", 64)
    recorder = _States()

    final, events = evolve(FlowState(ellipse), "gapf", StepperConfig(t_end=20.0), recorder=recorder)

    assert events[-1].kind == EVENT_CONVERGED
    r = final.curve.r
    area = 0.5 * float(np.sum(r * r)) * 2.0 * math.pi / r.size
    assert area == pytest.approx(2.0 * math.pi, rel=1e-8)
    assert np.max(np.abs(r - math.sqrt(2.0))) < 1e-3
