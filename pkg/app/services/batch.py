"""Batch quality control over many recording files with per-file error isolation."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from app.config import get_settings
from app.errors import PalosError
from app.models import BandSet, BatchError, BatchSummary, QcLabel, QcThresholds, QualityReport, SpectralConfig
from app.services.quality_report import build_report, write_report
from app.services.recording_io import read_recording, recording_id

logger = logging.getLogger(__name__)

AGGREGATE_COLUMNS = [
    "id", "label", "oha", "thv", "chv", "rbc", "palosi", "flagged",
    "se_delta", "se_theta", "se_alpha", "se_beta", "error",
]
HIGH_PALOSI = 0.9


class BatchResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    reports: List[QualityReport]
    errors: List[BatchError]
    aggregate: pd.DataFrame
    summary: BatchSummary

    @property
    def all_failed(self) -> bool:
        return not self.reports and bool(self.errors)


def _process(path: Path, cfg: SpectralConfig, thresholds: QcThresholds, bands: BandSet) -> Tuple[str, object]:
    rec_id = recording_id(path)
    try:
        rec = read_recording(path)
        return rec_id, build_report(rec, rec_id, cfg, thresholds, bands)
    except (PalosError, ValidationError, OSError, ValueError) as exc:
        logger.exception("Recording %s failed", rec_id)
        return rec_id, BatchError(recording_id=rec_id, reason=f"{type(exc).__name__}: {exc}")


def _report_row(report: QualityReport) -> Dict:
    t = report.temporal
    row = {
        "id": report.recording_id,
        "label": t.label.value,
        "oha": t.oha,
        "thv": t.thv,
        "chv": t.chv,
        "rbc": t.rbc,
        "palosi": report.palosi.global_index,
        "flagged": report.palosi.flag,
        "error": "",
    }
    for band in ("delta", "theta", "alpha", "beta"):
        row[f"se_{band}"] = report.band_entropy.get(band)
    return row


def _error_row(error: BatchError) -> Dict:
    row = {column: None for column in AGGREGATE_COLUMNS}
    row.update({"id": error.recording_id, "error": error.reason})
    return row


def _fraction(part: int, whole: int) -> float:
    return part / whole if whole else 0.0


def summarize_batch(reports: List[QualityReport], errors: List[BatchError], threshold: float) -> BatchSummary:
    labels = [label.value for label in QcLabel]
    crosstab = {label: {"flagged": 0, "unflagged": 0} for label in labels}
    above = {label: 0 for label in labels}
    for report in reports:
        label = report.temporal.label.value
        crosstab[label]["flagged" if report.palosi.global_index > threshold else "unflagged"] += 1
        above[label] += report.palosi.global_index > HIGH_PALOSI

    n = len(reports)
    per_label = {label: sum(crosstab[label].values()) for label in labels}
    return BatchSummary(
        n_files=n + len(errors),
        n_processed=n,
        n_failed=len(errors),
        crosstab=crosstab,
        crosstab_fraction={
            label: {key: _fraction(count, n) for key, count in row.items()} for label, row in crosstab.items()
        },
        fraction_flagged=_fraction(sum(row["flagged"] for row in crosstab.values()), n),
        fraction_flagged_by_label={label: _fraction(crosstab[label]["flagged"], per_label[label]) for label in labels},
        fraction_above_0_9=_fraction(sum(above.values()), n),
        fraction_above_0_9_by_label={label: _fraction(above[label], per_label[label]) for label in labels},
        errors=errors,
    )


def run_batch(
    paths: List[Path],
    cfg: Optional[SpectralConfig] = None,
    thresholds: Optional[QcThresholds] = None,
    bands: Optional[BandSet] = None,
    max_workers: Optional[int] = None,
) -> BatchResult:
    cfg = cfg or SpectralConfig.from_settings()
    thresholds = thresholds or QcThresholds.from_settings()
    bands = bands or BandSet()
    max_workers = max_workers or get_settings().max_workers

    logger.info("Batch QC over %d file(s) with %d worker(s)", len(paths), max_workers)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(lambda p: _process(p, cfg, thresholds, bands), paths))

    # keyed by id so results do not depend on enumeration order or worker count
    outcomes.sort(key=lambda item: item[0])
    reports = [o for _, o in outcomes if isinstance(o, QualityReport)]
    errors = [o for _, o in outcomes if isinstance(o, BatchError)]

    rows = [_report_row(o) if isinstance(o, QualityReport) else _error_row(o) for _, o in outcomes]
    aggregate = pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)
    summary = summarize_batch(reports, errors, thresholds.palosi_flag)
    if errors:
        logger.warning("%d of %d recording(s) failed", len(errors), len(paths))
    return BatchResult(reports=reports, errors=errors, aggregate=aggregate, summary=summary)


def write_batch(result: BatchResult, out_dir: Path) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    reports_dir = out_dir / "reports"
    for report in result.reports:
        write_report(report, reports_dir)
    paths = {"aggregate": out_dir / "aggregate.csv", "summary": out_dir / "summary.json"}
    out_dir.mkdir(parents=True, exist_ok=True)
    result.aggregate.to_csv(paths["aggregate"], index=False, float_format="%.10g")
    paths["summary"].write_text(json.dumps(result.summary.model_dump(mode="json"), sort_keys=True, indent=2) + "\n")
    return paths
