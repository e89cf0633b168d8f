import json

import pandas as pd
import pytest

from app.services.batch import AGGREGATE_COLUMNS, run_batch, write_batch
from app.services.recording_io import discover_recordings, write_recording

from tests.conftest import rank_one_recording, white_recording


def _write_set(directory, rng, n_flat, n_noisy):
    for i in range(n_flat):
        write_recording(rank_one_recording(rng, seconds=10.0), directory / f"flat-{i:02d}.json")
    for i in range(n_noisy):
        write_recording(white_recording(rng, n_channels=8, seconds=10.0), directory / f"noisy-{i:02d}.json")
    return discover_recordings([directory])


def test_all_parallel_recordings_are_flagged(tmp_path, rng):
    result = run_batch(_write_set(tmp_path, rng, 10, 0), max_workers=2)
    assert result.summary.n_processed == 10
    assert result.summary.fraction_flagged == 1.0


def test_flagged_fraction_counts_reports(tmp_path, rng):
    result = run_batch(_write_set(tmp_path, rng, 5, 15), max_workers=4)
    assert result.summary.fraction_flagged == pytest.approx(0.25)
    flagged = sum(row["flagged"] for row in result.summary.crosstab.values())
    assert flagged == 5


def test_corrupt_file_is_isolated(tmp_path, rng):
    paths = _write_set(tmp_path, rng, 1, 2)
    (tmp_path / "broken.json").write_text("{")
    result = run_batch(discover_recordings([tmp_path]), max_workers=2)
    assert len(result.reports) == 3
    assert len(result.errors) == 1
    assert result.errors[0].recording_id == "broken"
    assert not result.all_failed
    row = result.aggregate.set_index("id").loc["broken"]
    assert "MalformedHeader" in row["error"]
    assert len(paths) == 3


def test_results_do_not_depend_on_order_or_workers(tmp_path, rng):
    paths = _write_set(tmp_path, rng, 2, 3)
    one = run_batch(paths, max_workers=1)
    many = run_batch(list(reversed(paths)), max_workers=4)
    pd.testing.assert_frame_equal(one.aggregate, many.aggregate)
    assert list(one.aggregate["id"]) == sorted(one.aggregate["id"])


def test_write_batch(tmp_path, rng):
    result = run_batch(_write_set(tmp_path / "in", rng, 1, 1), max_workers=1)
    paths = write_batch(result, tmp_path / "out")
    frame = pd.read_csv(paths["aggregate"])
    assert list(frame.columns) == AGGREGATE_COLUMNS
    summary = json.loads(paths["summary"].read_text())
    assert summary["n_processed"] == 2
    assert sorted(p.name for p in (tmp_path / "out" / "reports").iterdir()) == ["flat-00.json", "noisy-00.json"]
