import io
import json

import numpy as np
import pytest

import headerr.analysis as analysis
import headerr.cli as cli
from headerr import ConfigError, ExtractionError, HeadingCurve, parse_config
from headerr.cli import RunManifest, emit, main, parse_sweep, run

from .strategies import assert_close_array, toy_config


def fake_curve(config, thetas=None, geometry=None, workers=1):
    thetas = np.radians([0.0, 40.0]) if thetas is None else np.asarray(thetas)
    larmor = 256933.123456789
    omega0 = larmor + np.arange(len(thetas)) * (1.0 if config.pump.helicity > 0 else -1.0)
    return HeadingCurve(
        thetas=thetas,
        omega0=omega0,
        reference=float(omega0[0]),
        fingerprint="f",
        geometry=config.geometry if geometry is None else geometry,
        helicity=config.pump.helicity_label,
    )


@pytest.mark.cli
def test_parse_sweep():
    axis, values = parse_sweep("theta=0:10:5")
    assert axis == "theta"
    assert_close_array(values, [0.0, 5.0, 10.0])
    axis, values = parse_sweep("B0=50uT:60uT:5uT")
    assert_close_array(values, [50e-6, 55e-6, 60e-6])
    assert parse_sweep("helicity=+,-") == ("helicity", ["+", "-"])
    assert_close_array(parse_sweep("detuning=0,2GHz")[1], [0.0, 2e9])
    bad_specs = (
        "nothing",
        "color=1:2:1",
        "theta=10:0:5",
        "theta=0:10:0",
        "B0=1:2:1parsec",
        "theta=-5:10:5",
        "theta=80:95:5",
        "theta=0,95",
        "theta=-1",
    )
    for bad in bad_specs:
        with pytest.raises(ConfigError):
            parse_sweep(bad)
    with pytest.raises(ConfigError):
        run("heading", parse_config("rb85_55uT"), {"theta": [-10.0, 0.0]})


@pytest.mark.cli
def test_emit_csv():
    manifest = RunManifest("abc", "heading", [])
    rows = [dict(theta_deg=40.0, omega0_hz=256933.123456, passed=True), dict(error="boom")]
    stream = io.StringIO()
    emit(["theta_deg", "omega0_hz", "passed", "error"], rows, "csv", manifest, stream)
    lines = stream.getvalue().splitlines()
    assert lines[0] == "# headerr 0.1 fingerprint=abc"
    assert lines[1] == "theta_deg,omega0_hz,passed,error"
    assert lines[2] == "40,256933,true,"
    assert lines[3] == ",,,boom"


@pytest.mark.cli
def test_emit_json():
    manifest = RunManifest("abc", "heading", ["B0"], wall_time=3.0)
    stream = io.StringIO()
    rows = [dict(theta_deg=np.float64(40.0), omega0_hz=256933.123456, B0=5e-5)]
    emit(["theta_deg", "omega0_hz", "B0", "error"], rows, "json", manifest, stream)
    payload = json.loads(stream.getvalue())
    assert payload["manifest"]["fingerprint"] == "abc"
    assert "wall_time" not in payload["manifest"]
    assert payload["units"]["omega0_hz"] == "Hz"
    assert payload["units"]["B0"] == "T"
    assert payload["rows"][0]["omega0_hz"] == 256933.123456
    assert payload["rows"][0]["error"] is None


@pytest.mark.cli
def test_run_heading_with_sweep(monkeypatch):
    monkeypatch.setattr(cli, "heading_error_curve", fake_curve)
    config = parse_config("rb85_55uT")
    sweeps = {"helicity": ["+", "-"], "theta": [0.0, 20.0, 40.0]}
    columns, rows, failures = run("heading", config, sweeps)
    assert failures == 0
    assert columns[:5] == cli.BASE_COLUMNS
    assert "helicity" in columns and "theta" not in columns
    assert len(rows) == 6
    assert [row["helicity"] for row in rows] == ["+"] * 3 + ["-"] * 3
    assert rows[2]["heading_error_hz"] == pytest.approx(2.0)
    assert rows[5]["heading_error_hz"] == pytest.approx(-2.0)


@pytest.mark.cli
def test_run_records_point_failures(monkeypatch):
    def flaky(config, thetas=None, geometry=None, workers=1):
        if config.pump.helicity < 0:
            raise ExtractionError("no sign change")
        return fake_curve(config, thetas, geometry, workers)

    monkeypatch.setattr(cli, "heading_error_curve", flaky)
    config = parse_config("rb85_55uT")
    columns, rows, failures = run("heading", config, {"helicity": ["+", "-"]})
    assert failures == 1
    assert rows[-1]["error"].startswith("ExtractionError")
    assert rows[-1]["helicity"] == "-"


@pytest.mark.cli
def test_run_heading_keeps_rows_around_a_failed_angle(monkeypatch):
    "One failing angle costs one row; the others keep their values."
    real = analysis.find_precession_frequency

    def failing_at_90(config, geometry=None):
        if abs(config.field.theta - np.pi / 2) < 1e-9:
            raise ExtractionError("no sign change in window")
        return real(config, geometry)

    monkeypatch.setattr(analysis, "find_precession_frequency", failing_at_90)
    columns, rows, failures = run("heading", toy_config(), {"theta": [0.0, 45.0, 90.0]})
    assert failures == 1
    assert [row["theta_deg"] for row in rows] == pytest.approx([0.0, 45.0, 90.0])
    assert rows[0]["error"] is None and rows[1]["error"] is None
    assert rows[2]["error"].startswith("ExtractionError")
    assert rows[0]["heading_error_hz"] == 0.0
    assert np.isfinite(rows[1]["omega0_hz"])
    assert np.isnan(rows[2]["omega0_hz"])


@pytest.mark.cli
def test_run_heading_reports_a_failed_reference(monkeypatch):
    real = analysis.find_precession_frequency

    def failing_at_0(config, geometry=None):
        if config.field.theta == 0.0:
            raise ExtractionError("no sign change in window")
        return real(config, geometry)

    monkeypatch.setattr(analysis, "find_precession_frequency", failing_at_0)
    columns, rows, failures = run("heading", toy_config(), {"theta": [30.0]})
    assert failures == 1
    assert len(rows) == 1
    assert np.isfinite(rows[0]["omega0_hz"])
    assert np.isnan(rows[0]["heading_error_hz"])
    assert rows[0]["error"] == "reference: ExtractionError: no sign change in window"


@pytest.mark.cli
def test_main_writes_table_and_manifest(monkeypatch, tmp_path):
    monkeypatch.setattr(cli, "heading_error_curve", fake_curve)
    out = tmp_path / "heading.csv"
    code = main(["heading", "--threads", "1", "--out", str(out), "--sweep", "theta=0:40:20"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# headerr 0.1 fingerprint=")
    assert len(lines) == 5
    manifest = json.loads((tmp_path / "heading.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "heading"
    assert manifest["sweep_axes"] == ["theta"]
    assert manifest["wall_time"] >= 0
    assert manifest["fingerprint"] in lines[0]


@pytest.mark.cli
def test_main_partial_failure_exit_code(monkeypatch, tmp_path):
    def broken(config, thetas=None, geometry=None, workers=1):
        raise ExtractionError("no sign change")

    monkeypatch.setattr(cli, "heading_error_curve", broken)
    code = main(["heading", "--threads", "1", "--out", str(tmp_path / "x.csv")])
    assert code == 2


@pytest.mark.cli
def test_main_fatal_errors(tmp_path):
    assert main(["heading", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["heading", "--sweep", "colour=1"]) == 1
    assert main(["heading", "--sweep", "theta=0:100:10"]) == 1


@pytest.mark.cli
def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["plot"])
