"""Per-recording quality report: temporal metrics, PaLOS indices and band entropies."""

import json
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from app.errors import RecordingIOError
from app.models import BandSet, QcThresholds, QualityReport, Recording, SpectralConfig
from app.services.connectivity import band_networks, shannon_entropy
from app.services.cpc import stepwise_cpc
from app.services.palosi import band_palosi, palosi
from app.services.recording import validate_recording
from app.services.spectra import cross_spectra_from_recording
from app.services.temporal_qc import temporal_metrics

logger = logging.getLogger(__name__)

FREQ_DECIMALS = 9


def _tool_version() -> str:
    from app import __version__

    return __version__


def artifact_choices(rec: Recording, thresholds: QcThresholds) -> dict:
    choices = {
        "thv_chv_cutoff": f"{thresholds.variance_z_threshold:g} x median standard deviation",
        "oha_voltage_threshold_uv": thresholds.voltage_amplitude_threshold,
        "cpc_frequency_weights": "uniform",
        "reference": rec.reference,
    }
    if "head_model" in rec.provenance:
        choices["head_model"] = rec.provenance["head_model"]
    return choices


def build_report(
    rec: Recording,
    recording_id: str,
    cfg: Optional[SpectralConfig] = None,
    thresholds: Optional[QcThresholds] = None,
    bands: Optional[BandSet] = None,
    seeds: Optional[List[int]] = None,
) -> QualityReport:
    cfg = cfg or SpectralConfig.from_settings()
    thresholds = thresholds or QcThresholds.from_settings()
    bands = bands or BandSet()
    rec = validate_recording(rec)

    temporal = temporal_metrics(rec, thresholds, rec.bad_channels)
    cs = cross_spectra_from_recording(rec, cfg)
    cpc = stepwise_cpc(cs)
    indices = palosi(cs, cpc, thresholds)
    indices = indices.model_copy(update={"freqs": np.round(indices.freqs, FREQ_DECIMALS)})
    entropy = {name: shannon_entropy(net) for name, net in band_networks(cs, bands).items()}

    logger.info(
        "%s: label %s, PaLOSi %.4f%s",
        recording_id, temporal.label.value, indices.global_index, " (flagged)" if indices.flag else "",
    )
    return QualityReport(
        recording_id=recording_id,
        channels=list(rec.channels),
        fs=rec.fs,
        n_segments=cs.n_segments,
        spectral_config=cfg,
        thresholds=thresholds,
        temporal=temporal,
        palosi=indices,
        band_palosi=band_palosi(cs, cpc, bands),
        band_entropy=entropy,
        artifact_choices=artifact_choices(rec, thresholds),
        tool_version=_tool_version(),
        seeds=list(seeds or []),
    )


def report_to_json(report: QualityReport) -> str:
    return json.dumps(report.model_dump(mode="json", by_alias=True), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> QualityReport:
    return QualityReport.model_validate_json(text)


def write_report(report: QualityReport, out_dir: Path) -> Path:
    path = Path(out_dir) / f"{report.recording_id}.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report_to_json(report), encoding="utf-8")
    except OSError as exc:
        raise RecordingIOError(f"cannot write report {path}: {exc}") from exc
    return path
