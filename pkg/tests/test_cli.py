import json

import numpy as np
from click.testing import CliRunner

from netbo.cli import main


def test_problems_listing():
    result = CliRunner().invoke(main, ["problems"])
    assert result.exit_code == 0
    for pid in ("dropwave", "alpine2_6", "sis_calibration", "covid_testing"):
        assert pid in result.output
    assert "unknown" in result.output  # covid has no reference optimum


def test_run_random_writes_artifacts(tmp_path):
    result = CliRunner().invoke(
        main,
        [
            "run",
            "--problem", "dropwave",
            "--method", "random",
            "--budget", "5",
            "--replications", "2",
            "--seed", "3",
            "--mc-samples", "16",
            "--restarts", "2",
            "--raw-candidates", "8",
            "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "manifest.json").exists()
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "trace_rep000.csv").exists()
    assert (tmp_path / "trace_rep001.csv").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["base_seed"] == 3
    assert manifest["rows_per_trace"] == 11


def test_run_eifn_smoke(tmp_path):
    result = CliRunner().invoke(
        main,
        [
            "run",
            "--problem", "prop2_chain",
            "--method", "ei-fn",
            "--budget", "2",
            "--mc-samples", "16",
            "--restarts", "2",
            "--raw-candidates", "8",
            "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "final best" in result.output


def test_unknown_problem_is_rejected():
    result = CliRunner().invoke(
        main,
        ["run", "--problem", "nope", "--method", "ei", "--budget", "1", "--out", "/tmp/x"],
    )
    assert result.exit_code != 0
    assert "unknown problem" in result.output


def test_bad_numeric_input_is_rejected():
    result = CliRunner().invoke(
        main,
        ["run", "--problem", "dropwave", "--method", "ei", "--budget", "0", "--out", "/tmp/x"],
    )
    assert result.exit_code != 0
    assert "budget" in result.output.lower()


def test_candidates_must_cover_restarts():
    result = CliRunner().invoke(
        main,
        [
            "run",
            "--problem", "dropwave",
            "--method", "random",
            "--budget", "1",
            "--restarts", "9",
            "--raw-candidates", "4",
            "--out", "/tmp/x",
        ],
    )
    assert result.exit_code != 0
    assert "raw-candidates" in result.output


def test_check_command_passes():
    result = CliRunner().invoke(main, ["check"])
    assert result.exit_code == 0, result.output
    assert "all checks passed" in result.output
    assert "FAIL" not in result.output
