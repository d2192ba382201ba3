import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import ellipe

from curveflow.core.diagnostics import (
    Recorder,
    check_bounds,
    compare_gapf_csf,
    decay_fit,
    length_identity_residual,
    record,
)
from curveflow.core.errors import DecayFitRefused, InvalidCurveError
from curveflow.core.integrators import evolve
from curveflow.core.models import (
    EVENT_BLOW_UP,
    EVENT_STAR_LOST,
    EVENT_TIME_LIMIT,
    DiagRecord,
    FlowState,
    MarkerCurve,
    PolarCurve,
    StepperConfig,
)
from curveflow.initial_curves import build_initial


def _entry(t, **overrides):
    values = dict(
        t=t,
        L=2.0 * math.pi,
        A=math.pi,
        kappa_min=1.0,
        kappa_max=1.0,
        p_min=1.0,
        r_min=1.0,
        r_max=1.0,
        grad_max=0.0,
        deficit=0.0,
        q2=0.0,
        qs2=0.0,
        sym=0.0,
    )
    values.update(overrides)
    return DiagRecord(**values)


def _gapf_history(curve_id, n=64, t_end=0.5, record_count=20):
    recorder = Recorder("gapf")
    evolve(FlowState(build_initial(curve_id, n)), "gapf", StepperConfig(t_end=t_end, record_count=record_count), recorder=recorder)
    return recorder.history


def test_circle_record_is_round():
    entry = record(FlowState(PolarCurve(np.ones(64))), "gapf")

    assert entry.L == pytest.approx(2.0 * math.pi, rel=1e-14)
    assert entry.A == pytest.approx(math.pi, rel=1e-14)
    assert abs(entry.deficit) < 1e-12
    assert entry.q2 < 1e-24
    assert entry.qs2 < 1e-24
    assert entry.sym == 0.0
    assert abs(entry.dissipation) < 1e-12
    assert entry.total_curvature == pytest.approx(2.0 * math.pi, rel=1e-14)


def test_ellipse_isoperimetric_deficit():
    entry = record(FlowState(build_initial("ellipse(2, 1)", 256)), "gapf")

    length = 8.0 * ellipe(0.75)
    assert entry.deficit == pytest.approx(length**2 - 8.0 * math.pi**2, rel=1e-10)
    assert entry.deficit == pytest.approx(14.909, abs=1e-3)
    assert entry.q2 > 0.0
    assert entry.energy_gap > 0.0


def test_curvature_gap_is_resolved_on_moderate_grids():
    coarse = record(FlowState(build_initial("ellipse(2, 1)", 256)), "gapf")
    fine = record(FlowState(build_initial("ellipse(2, 1)", 2560)), "gapf")

    assert coarse.q2 == pytest.approx(fine.q2, abs=1e-8)
    assert coarse.qs2 == pytest.approx(fine.qs2, rel=1e-8)


def test_csf_dissipation_is_the_curvature_energy():
    state = FlowState(build_initial("cos_star(1, 0.2, 3)", 128))

    gapf = record(state, "gapf")
    csf = record(state, "csf")

    assert csf.dissipation == pytest.approx(gapf.energy_gap + 4.0 * math.pi**2 / gapf.L, rel=1e-12)
    assert gapf.dissipation == pytest.approx(gapf.q2, rel=1e-8)


def test_marker_record_fields():
    phi = 2.0 * math.pi * np.arange(256) / 256
    polygon = MarkerCurve(np.column_stack((np.cos(phi), np.sin(phi))))

    entry = record(FlowState(polygon, t=0.25), "csf")

    assert entry.t == 0.25
    assert entry.sym is None
    assert entry.p_min > 0.0
    assert entry.r_min == pytest.approx(1.0, rel=1e-14)
    assert entry.total_curvature == pytest.approx(2.0 * math.pi, rel=1e-3)
    assert entry.to_row()[-1] == ""


def test_recorder_keeps_history_curves_and_calls_back():
    seen = []
    recorder = Recorder("gapf", keep_curves=True, on_record=seen.append)

    evolve(FlowState(PolarCurve(np.ones(32))), "gapf", StepperConfig(t_end=0.05, record_count=5), recorder=recorder)

    assert len(recorder.history) == 6
    assert len(recorder.curves) == 6
    assert seen == recorder.history
    assert recorder.initial.t == 0.0
    assert recorder.first_time(lambda entry: entry.t > 0.025) == pytest.approx(0.03)
    assert recorder.first_time(lambda entry: entry.A < 0.0) is None


def test_length_identity_residual_on_a_linear_history():
    history = [_entry(t, L=10.0 - 2.0 * t, dissipation=2.0) for t in np.linspace(0.0, 1.0, 11)]

    assert length_identity_residual(history) < 1e-15
    with pytest.raises(ValueError):
        length_identity_residual([])


def test_length_identity_holds_along_a_gapf_run():
    history = _gapf_history("cos_star(1, 0.2, 3)", n=64, t_end=0.2, record_count=200)

    assert length_identity_residual(history) < 1e-4


def test_bounds_hold_along_a_gapf_run():
    history = _gapf_history("cos_star(1, 0.2, 2)")

    report = check_bounds(history)

    assert report.ok
    assert report.C1 == pytest.approx(max(history[0].grad_max, 3.0 * history[0].L / math.pi))
    assert report.checks["area"].worst_margin <= 0.0
    assert report.checks["support"].worst_margin > 0.0


def test_bounds_flag_an_area_jump_at_its_time():
    history = _gapf_history("cos_star(1, 0.2, 2)")
    broken = list(history)
    broken[7] = replace(broken[7], A=broken[7].A * 1.01)

    report = check_bounds(broken)

    assert not report.ok
    assert [check.name for check in report.violations] == ["area"]
    assert report.checks["area"].first_violation_t == history[7].t


def test_bounds_reject_unknown_tolerances():
    with pytest.raises(ValueError):
        check_bounds([_entry(0.0)], tolerances={"volume": 1e-3})
    with pytest.raises(ValueError):
        check_bounds([])


def test_decay_fit_recovers_an_exponential_rate():
    history = [_entry(t, q2=5.0 * math.exp(-3.0 * t)) for t in np.linspace(0.0, 2.0, 41)]

    fit = decay_fit(history, "q2", (0.5, 2.0))

    assert fit.rate == pytest.approx(-3.0, abs=1e-9)
    assert fit.residual < 1e-9
    assert fit.window == pytest.approx((0.5, 2.0))
    assert fit.samples == 31


def test_decay_fit_refuses_noise_and_bad_windows():
    round_history = [_entry(t, qs2=1e-20) for t in np.linspace(0.0, 1.0, 5)]

    with pytest.raises(DecayFitRefused):
        decay_fit(round_history, "qs2", (0.0, 1.0))
    with pytest.raises(ValueError):
        decay_fit(round_history, "qs2", (1.0, 1.0))
    with pytest.raises(ValueError):
        decay_fit(round_history, "qs2", (0.1, 0.2))
    with pytest.raises(ValueError):
        decay_fit(round_history, "deficit", (0.0, 1.0))


def test_compare_on_the_circle_matches_the_exact_csf_radius():
    circle = PolarCurve(np.ones(32))

    result = compare_gapf_csf(circle, StepperConfig(t_end=10.0, record_count=200))

    assert result.min_margin == pytest.approx(0.0, abs=1e-12)
    assert result.gapf_terminal.kind == EVENT_TIME_LIMIT
    assert result.csf_terminal.kind in (EVENT_BLOW_UP, EVENT_STAR_LOST)
    assert result.t_grid[0] == 0.0
    t_last = result.t_grid[-1]
    assert result.margins[-1] == pytest.approx(1.0 - math.sqrt(1.0 - 2.0 * t_last), abs=1e-6)
    assert all(margin >= -1e-12 for margin in result.margins)
    assert result.gapf_p_min == pytest.approx(1.0, rel=1e-12)


def test_compare_refuses_curves_without_central_symmetry():
    with pytest.raises(InvalidCurveError):
        compare_gapf_csf(build_initial("offset_star(1, 0.2, 2, 0.1)", 64), StepperConfig())
