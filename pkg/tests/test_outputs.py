import csv
import json
import math

import numpy as np
import pytest

from curveflow import outputs
from curveflow.core.errors import ScenarioError
from curveflow.core.models import CSV_COLUMNS, DiagRecord, MarkerCurve, PolarCurve
from curveflow.initial_curves import build_initial, read_samples
from curveflow.outputs import (
    format_frame,
    frame_viewbox,
    write_csv,
    write_frames,
    write_report,
    write_samples,
)


def _entry(t, sym=0.0):
    return DiagRecord(
        t=t, L=2.0 * math.pi, A=math.pi, kappa_min=1.0, kappa_max=1.0, p_min=1.0, r_min=1.0,
        r_max=1.0, grad_max=0.0, deficit=0.0, q2=0.0, qs2=0.0, sym=sym,
    )


def test_csv_has_the_fixed_header_and_one_row_per_record(tmp_path):
    path = write_csv(tmp_path / "series.csv", [_entry(0.0), _entry(0.5, sym=None)])

    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))

    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 3
    assert float(rows[2][0]) == 0.5
    assert rows[2][-1] == ""
    assert not list(tmp_path.glob("*.tmp"))


def test_frame_viewbox_scales_the_bounding_box():
    viewbox = frame_viewbox(PolarCurve(np.ones(64)))

    assert viewbox == pytest.approx((-1.5, -1.5, 3.0, 3.0))


def test_frame_viewbox_flips_the_y_axis():
    shifted = build_initial("ellipse(2, 1)", 64, "marker")
    pts = shifted.pts + np.array([0.0, 3.0])

    x0, y0, width, height = frame_viewbox(MarkerCurve(pts))

    assert y0 == pytest.approx(-3.0 - 1.5)
    assert (x0, width, height) == pytest.approx((-3.0, 6.0, 3.0))


def test_frames_are_numbered_svg_polylines(tmp_path):
    curves = [PolarCurve(np.full(32, radius)) for radius in (1.0, 0.8, 0.6)]

    paths = write_frames(tmp_path / "frames", curves, [0.0, 0.1, 0.2])

    assert [path.name for path in paths] == ["frame_00000.svg", "frame_00001.svg", "frame_00002.svg"]
    text = paths[1].read_text(encoding="utf-8")
    assert text.startswith("<svg")
    assert "<polyline" in text
    assert "t = 0.1" in text
    assert write_frames(tmp_path / "empty", [], []) == []
    with pytest.raises(ValueError):
        write_frames(tmp_path / "bad", curves, [0.0])


def test_format_frame_closes_the_polygon():
    text = format_frame(PolarCurve(np.ones(16)), (-1.5, -1.5, 3.0, 3.0), 0.0)

    points = text.split('points="')[1].split('"')[0].split()
    assert len(points) == 17
    assert points[0] == points[-1]


def test_report_replaces_non_finite_numbers(tmp_path):
    path = write_report(
        tmp_path / "report.json",
        {"rate": float("nan"), "values": [np.float64(1.5), np.int64(3)], "ok": np.bool_(True), "where": tmp_path},
    )

    payload = json.loads(path.read_text(encoding="utf-8"))

    assert payload == {"rate": None, "values": [1.5, 3], "ok": True, "where": str(tmp_path)}


def test_samples_file_round_trip(tmp_path):
    star = build_initial("cos_star(1, 0.2, 3)", 32)

    path = write_samples(tmp_path / "star.txt", star)

    assert np.array_equal(read_samples(path).r, star.r)


def test_failed_write_raises_scenario_error_and_leaves_no_temp_file(tmp_path, monkeypatch):
    events = []
    monkeypatch.setattr(outputs, "log_event", lambda event, **payload: events.append(event))
    target = tmp_path / "taken"
    target.mkdir()

    with pytest.raises(ScenarioError):
        write_report(target, {"a": 1})

    assert not list(tmp_path.glob("*.tmp"))
    assert events == []


def test_successful_writes_are_logged(tmp_path, monkeypatch):
    events = []
    monkeypatch.setattr(outputs, "log_event", lambda event, **payload: events.append((event, payload["kind"])))

    write_csv(tmp_path / "series.csv", [_entry(0.0)])

    assert events == [("output.written", "csv")]
