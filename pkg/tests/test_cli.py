import json
import os
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

from app import __version__, create_cli
from app.models import Recording
from app.services.recording_io import read_recording, write_recording

from tests.conftest import labels, white_recording

GOLDEN_REPORT = Path(__file__).parent / "golden" / "scenario_a_seed1_report.json"


@pytest.fixture
def cli():
    return create_cli()


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def scenario_a(tmp_path, cli, runner):
    out = tmp_path / "a.json"
    result = runner.invoke(
        cli, ["simulate", "--scenario", "A", "--seed", "1", "--out", str(out), "--grid-out", str(tmp_path / "grid.csv")]
    )
    assert result.exit_code == 0, result.output
    return out


def test_version(cli, runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_single_dipole_palosi_is_one(cli, runner, scenario_a):
    result = runner.invoke(cli, ["palosi", str(scenario_a), "--per-channel"])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0] == "global 1.000000"
    assert lines[1] == "flagged true"
    assert sum(line.startswith("channel ") for line in lines) == 19


def test_simulate_writes_manifest(tmp_path, scenario_a):
    manifest = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest["tag"] == "A"
    assert manifest["seed"] == 1
    assert read_recording(scenario_a).n_channels == 19


def test_qc_labels_clean_recording_good(tmp_path, cli, runner, rng):
    write_recording(white_recording(rng, n_channels=8, seconds=20.0), tmp_path / "in" / "clean.json")
    out = tmp_path / "out"
    result = runner.invoke(cli, ["qc", str(tmp_path / "in"), "--out", str(out), "--workers", "1"])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "reports" / "clean.json").read_text())
    assert report["temporal"]["label"] == "Good"
    assert list(pd.read_csv(out / "aggregate.csv")["id"]) == ["clean"]


def test_qc_is_deterministic(tmp_path, cli, runner, scenario_a):
    texts = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = runner.invoke(cli, ["qc", str(scenario_a), "--out", str(out)])
        assert result.exit_code == 0, result.output
        texts.append((out / "reports" / "a.json").read_bytes())
    assert texts[0] == texts[1]


def test_qc_report_matches_golden(tmp_path, cli, runner, scenario_a):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["qc", str(scenario_a), "--out", str(out), "--workers", "1"])
    assert result.exit_code == 0, result.output
    produced = (out / "reports" / "a.json").read_bytes()
    if os.environ.get("PALOSI_UPDATE_GOLDEN") or not GOLDEN_REPORT.exists():
        GOLDEN_REPORT.parent.mkdir(exist_ok=True)
        GOLDEN_REPORT.write_bytes(produced)
        pytest.skip(f"wrote {GOLDEN_REPORT.name}, commit it")
    assert produced == GOLDEN_REPORT.read_bytes()


def test_qc_pdf(tmp_path, cli, runner, scenario_a):
    pdf = tmp_path / "qc.pdf"
    result = runner.invoke(cli, ["qc", str(scenario_a), "--out", str(tmp_path / "out"), "--pdf", str(pdf)])
    assert result.exit_code == 0, result.output
    assert pdf.read_bytes().startswith(b"%PDF")


def test_qc_exits_one_when_every_file_fails(tmp_path, cli, runner):
    (tmp_path / "bad.json").write_text("{")
    result = runner.invoke(cli, ["qc", str(tmp_path / "bad.json"), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1
    assert "bad ERROR" in result.output


def test_malformed_header_is_a_validation_error(tmp_path, cli, runner):
    (tmp_path / "bad.json").write_text("{")
    result = runner.invoke(cli, ["palosi", str(tmp_path / "bad.json")])
    assert result.exit_code == 2


def test_unknown_flag_is_a_usage_error(cli, runner):
    result = runner.invoke(cli, ["palosi", "--no-such-flag"])
    assert result.exit_code == 2


def test_simulate_requires_seed(tmp_path, cli, runner):
    result = runner.invoke(cli, ["simulate", "--scenario", "A", "--out", str(tmp_path / "x.json")])
    assert result.exit_code == 2


def test_connectivity_writes_network(tmp_path, cli, runner, scenario_a):
    out = tmp_path / "alpha.csv"
    result = runner.invoke(cli, ["connectivity", str(scenario_a), "--band", "alpha", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "entropy 0.000000" in result.output
    assert pd.read_csv(out, index_col=0).shape == (19, 19)


def test_degrade_keeps_top_component(tmp_path, cli, runner, rng):
    # FastICA needs non-Gaussian sources
    sources = rng.uniform(-1.0, 1.0, (4, 3000))
    rec = Recording(data=10.0 * rng.standard_normal((4, 4)) @ sources, fs=100.0, channels=labels(4))
    write_recording(rec, tmp_path / "noise.json")
    out = tmp_path / "degraded.json"
    result = runner.invoke(
        cli, ["degrade", str(tmp_path / "noise.json"), "--keep-top", "1", "--seed", "0", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "palosi_after 1.000000" in result.output
    assert read_recording(out).provenance["kept"] == 1


def test_inverse_on_grid(tmp_path, cli, runner, scenario_a):
    out = tmp_path / "sources.json"
    result = runner.invoke(
        cli, ["inverse", str(scenario_a), "--leadfield", str(tmp_path / "grid.csv"), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    sources = read_recording(out)
    assert sources.n_channels == 103
    assert sources.provenance["inverse"] == "sLORETA"
