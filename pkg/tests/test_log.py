import io
import json

import pytest

from pihlab import log
from pihlab.console import NullProgressHandler, ProgressLine, StatusLine
from pihlab.errors import ConfigError, InvalidSpecError, LabError
from pihlab.report import ReportFormatter, render_report
from pihlab.units import format_duration, format_force, format_ratio, ticks_for


def test_select_level_clamps():
    choices = (log.DEBUG, log.INFO, log.WARNING)
    assert log.select_level(choices, log.INFO, 0) == log.INFO
    assert log.select_level(choices, log.INFO, -1) == log.DEBUG
    assert log.select_level(choices, log.INFO, -5) == log.DEBUG
    assert log.select_level(choices, log.INFO, 3) == log.WARNING


def test_stream_logger_filters_and_formats():
    stream = io.StringIO()
    logger = log.StreamLogger(stream=stream, min_level=log.INFO)
    logger.debug("hidden {x}", x=1)
    logger.info("shown {x:.2f}", x=1.5)
    logger.warning("literal {braces}")
    assert stream.getvalue() == "info: shown 1.50\nwarning: literal {braces}\n"


def test_null_and_recording_loggers():
    assert isinstance(log.ensure_logger(None), log.NullLogger)
    recorder = log.RecordingLogger()
    assert log.ensure_logger(recorder) is recorder
    recorder.verbose("a {0}", 1)
    recorder.error("b")
    assert recorder.messages() == ["a 1", "b"]
    assert recorder.messages(log.ERROR) == ["b"]


def test_tagged_logger_prefixes_and_forwards():
    recorder = log.RecordingLogger()
    tagged = recorder.tagged("seed 7")
    tagged.warning("settled at {k}", k=3)
    tagged.info("literal {braces}")
    assert recorder.records == [(log.WARNING, "[seed 7] settled at 3"), (log.INFO, "[seed 7] literal {braces}")]
    null = log.NullLogger()
    assert null.tagged("x") is null


def test_lab_error_renders_context():
    error = InvalidSpecError("bad trajectory", speed=0.0, num_ticks=3)
    assert str(error) == "bad trajectory (num_ticks=3, speed=0.0)"
    assert str(LabError("plain")) == "plain"
    assert isinstance(error, ValueError)
    assert isinstance(ConfigError("x"), LabError)


def test_units():
    assert ticks_for(1.0, 0.02) == 50
    assert ticks_for(0.001, 0.02) == 1
    assert format_duration(75.25, 1) == "1m 15.2s"
    assert format_force(18.5714) == "18.571 N"
    assert format_ratio(None) == "-"


def test_status_and_progress_lines():
    stream = io.StringIO()
    line = StatusLine(stream)
    line.set_text("long text")
    line.set_text("short")
    assert stream.getvalue() == "\rlong text\rshort    "

    stream = io.StringIO()
    progress = ProgressLine(stream, "collect")
    progress.progress(2, 5)
    assert "collect: 2/5" in stream.getvalue()
    progress.complete()
    assert stream.getvalue().endswith("\r")

    NullProgressHandler().progress(1, 2)


def test_render_report_of_empty_directory(tmp_path):
    assert render_report(tmp_path) == ["No results in %s" % tmp_path]


def test_render_report(tmp_path):
    (tmp_path / "summary.json").write_text(json.dumps({
        "controller": "nonlinear",
        "n_trials": 2,
        "success_rate": 0.5,
        "mean_corrections": 3.0,
        "trials": [
            {"success": True, "reason": "success", "final_offset": [0.1, -0.2]},
            {"success": False, "reason": "diverged", "final_offset": [4.0, 0.0]},
        ],
    }))
    (tmp_path / "evaluation.json").write_text(json.dumps({"rows": [
        {"axis": "x", "controller": "linear", "feature_mode": "full", "accuracy": 0.9, "rmse": 0.4},
        {"axis": "x", "controller": "linear", "feature_mode": "reduced", "accuracy": 0.95, "rmse": 0.3},
    ]}))
    lines = render_report(tmp_path)
    assert "  success rate:      0.50" in lines
    assert "  failed (diverged): 1" in lines
    assert any(line.startswith("X") and "0.9500" in line for line in lines)
    assert any(line.startswith("Y") and line.rstrip().endswith("-") for line in lines)


def test_report_formatter_convergence():
    lines = list(ReportFormatter().format_convergence({
        "controller": "linear", "n_episodes": 50, "ensemble_window": 17,
        "ensemble_time_s": 17.0, "steady_fz": 18.57,
    }))
    assert "  ensemble:          window 17 (17.0 s)" in lines
    assert "  steady fz:         18.570 N" in lines


def test_report_rejects_corrupt_result(tmp_path):
    (tmp_path / "convergence.json").write_text("{")
    with pytest.raises(LabError):
        render_report(tmp_path)
