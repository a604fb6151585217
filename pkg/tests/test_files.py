"""Tests for the file formats."""

from __future__ import annotations

import io
import json
import math

import pytest

from helpers import exact_scan, make_env
from wifidop.dop import assess
from wifidop.errors import ParseError, UnknownAp, ValidationError
from wifidop.files import (
    format_number,
    load_environment,
    load_report,
    load_scans,
    load_trajectory,
    write_assessments,
    write_fixes,
    write_report,
    write_scans,
)
from wifidop.propagation import PropagationModel
from wifidop.radio import dbm_to_mw
from wifidop.sim import NoiseModel, Trajectory, run_experiment, summarize
from wifidop.solver import SolverConfig, solve

TETRAHEDRON = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]


def _write_env(tmp_path, payload):
    path = tmp_path / "env.json"
    path.write_text(json.dumps(payload))
    return path


def test_load_lab_environment(lab_path):
    env = load_environment(lab_path)
    assert len(env.aps) == 8
    assert env.dimension == 3
    assert env.ss_threshold == pytest.approx(dbm_to_mw(-85.0))
    assert env.ap("ap-2a").position == (15.0, 2.0, 5.5)
    assert env.ap("ap-1a").tx_power == pytest.approx(100.0)


def test_environment_defaults(tmp_path):
    path = _write_env(tmp_path, {"aps": [{"id": "a", "x": 0, "y": 0, "z": 0, "tx_power_dbm": 0}]})
    env = load_environment(path)
    assert env.ss_threshold == 0.0
    assert env.receiver.rx_gain == 1.0
    assert env.ap("a").wavelength == 0.125
    assert env.ap("a").tx_gain == 1.0


@pytest.mark.parametrize(
    ("payload", "field"),
    [
        ({"aps": [{"id": "a", "x": 0, "y": 0, "z": 0}]}, "tx_power_dbm"),
        ({"aps": [{"id": "a", "x": 0, "y": "north", "z": 0, "tx_power_dbm": 0}]}, "y"),
        ({"aps": [{"x": 0, "y": 0, "z": 0, "tx_power_dbm": 0}]}, "id"),
        ({"aps": [{"id": "a", "x": 0, "y": 0, "z": 0, "tx_power_dbm": 0}], "dimension": 4}, "dimension"),
        ({"aps": "none"}, "aps"),
        (
            {
                "aps": [
                    {"id": "a", "x": 0, "y": 0, "z": 0, "tx_power_dbm": 0},
                    {"id": "a", "x": 1, "y": 0, "z": 0, "tx_power_dbm": 0},
                ]
            },
            "id",
        ),
    ],
)
def test_environment_validation_names_the_field(tmp_path, payload, field):
    with pytest.raises(ValidationError) as excinfo:
        load_environment(_write_env(tmp_path, payload))
    assert excinfo.value.field == field


def test_environment_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "aps": [\n    {"id": "a",,}\n  ]\n}\n')
    with pytest.raises(ParseError) as excinfo:
        load_environment(path)
    assert excinfo.value.line == 3
    assert "broken.json:3" in str(excinfo.value)


def test_load_walk_trajectory(walk_path):
    trajectory = load_trajectory(walk_path)
    assert len(trajectory.waypoints) == 5
    assert trajectory.speed == 1.0
    assert trajectory.waypoints[3] == (15.0, 10.0, 4.2)


def test_load_scans_groups_rows(tmp_path):
    path = tmp_path / "scans.csv"
    path.write_text(
        "timestamp,ap_id,rss_dbm\n"
        "2.0,b,-60\n"
        "1.0,a,-50\n"
        "1.0,b,-inf\n"
        "2.0,a,\n"
    )
    scans = load_scans(path)
    assert [scan.timestamp for scan in scans] == [1.0, 2.0]
    assert scans[0].readings == {"a": pytest.approx(1e-5), "b": 0.0}
    assert scans[1].readings["a"] == 0.0
    assert scans[0].truth is None


def test_load_scans_truth_columns(tmp_path):
    path = tmp_path / "scans.csv"
    path.write_text(
        "timestamp,ap_id,rss_dbm,truth_x,truth_y,truth_z\n"
        "0,a,-50,1,2,3\n"
        "0,b,-55,1,2,3\n"
    )
    assert load_scans(path)[0].truth == (1.0, 2.0, 3.0)

    path.write_text(
        "timestamp,ap_id,rss_dbm,truth_x,truth_y,truth_z\n"
        "0,a,-50,1,2,3\n"
        "0,b,-55,1,2,4\n"
    )
    with pytest.raises(ParseError) as excinfo:
        load_scans(path)
    assert excinfo.value.line == 3


def test_load_scans_errors(tmp_path):
    path = tmp_path / "scans.csv"
    path.write_text("timestamp,ap_id\n0,a\n")
    with pytest.raises(ParseError):
        load_scans(path)

    path.write_text("timestamp,ap_id,rss_dbm\n0,a,loud\n")
    with pytest.raises(ParseError) as excinfo:
        load_scans(path)
    assert excinfo.value.line == 2

    path.write_text("timestamp,ap_id,rss_dbm\n0,ghost,-40\n")
    with pytest.raises(UnknownAp):
        load_scans(path, make_env(TETRAHEDRON))


def test_written_scans_load_back(tmp_path):
    env = make_env(TETRAHEDRON)
    scan = exact_scan(env, (0.0, 0.0, 0.0), timestamp=4.0)
    readings = dict(scan.readings)
    readings["ap-03"] = 0.0
    path = tmp_path / "scans.csv"
    write_scans(path, [type(scan)(timestamp=4.0, readings=readings, truth=scan.truth)])
    loaded = load_scans(path, env)
    assert loaded[0].truth == (0.0, 0.0, 0.0)
    assert loaded[0].readings["ap-03"] == 0.0
    assert loaded[0].readings["ap-00"] == pytest.approx(readings["ap-00"], rel=1e-14)


def test_format_number():
    assert format_number(math.inf) == "inf"
    assert format_number(math.nan) == "nan"
    assert format_number(1.5) == "1.5"
    assert format_number(0.1, 17) == "0.10000000000000001"


def test_write_assessments_prints_infinite_dop():
    env = make_env(TETRAHEDRON[:3] + [(5, 5, 5)])
    scan = exact_scan(env, (0.0, 0.0, 0.0))
    stream = io.StringIO()
    write_assessments(stream, [(0.0, assess(env, scan, (0.0, 0.0, 0.0)))])
    lines = stream.getvalue().splitlines()
    assert lines[0] == "timestamp,visible,qualified,dop,classification"
    assert lines[1].split(",")[:3] == ["0", "4", "4"]

    readings = dict(scan.readings, **{"ap-03": 0.0})
    stream = io.StringIO()
    write_assessments(stream, [(1.0, assess(env, type(scan)(timestamp=1.0, readings=readings), (0.0, 0.0, 0.0)))])
    assert stream.getvalue().splitlines()[1] == "1,3,3,inf,insufficient"


def test_write_fixes_includes_truth_error():
    env = make_env([(0, 0, 0.5), (20, 0, 2.5), (20, 20, 0.5), (0, 20, 2.5), (10, 1, 3.0)])
    fix = solve(env, exact_scan(env, (5.0, 6.0, 1.0)), SolverConfig())
    stream = io.StringIO()
    write_fixes(stream, [fix])
    header, row = stream.getvalue().splitlines()
    assert header.endswith("truth_x,truth_y,truth_z,error_m")
    values = dict(zip(header.split(","), row.split(",")))
    assert float(values["x"]) == pytest.approx(5.0, abs=1e-6)
    assert values["converged"] == "true"
    assert float(values["error_m"]) < 1e-6


def test_report_round_trip_preserves_summary(tmp_path):
    env = make_env([(0, 0, 0.5), (20, 0, 2.5), (20, 20, 0.5), (0, 20, 2.5), (10, 1, 3.0), (19, 10, 1.0)])
    trajectory = Trajectory(waypoints=[(3, 3, 1), (17, 17, 2)])
    report = run_experiment(env, trajectory, NoiseModel(sigma_db=2.0), PropagationModel.friis(), SolverConfig())
    path = tmp_path / "report.csv"
    write_report(path, report.samples)
    loaded = summarize(load_report(path))
    assert repr(loaded.bins) == repr(report.bins)
    assert repr(loaded.spearman) == repr(report.spearman)
    assert loaded.infinite_count == report.infinite_count
    assert [s.error_m for s in loaded.samples] == [s.error_m for s in report.samples]


def test_load_report_requires_columns(tmp_path):
    path = tmp_path / "report.csv"
    path.write_text("time,dop\n0,1\n")
    with pytest.raises(ParseError):
        load_report(path)
