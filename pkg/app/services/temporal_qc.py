"""Temporal quality ratios (OHA, THV, CHV, RBC) and the Good/Ok/Bad rule."""

import logging
from typing import Iterable, Optional

import numpy as np

from app.errors import InvalidConfig, UnknownChannel
from app.models import QcLabel, QcThresholds, Recording, TemporalMetrics

logger = logging.getLogger(__name__)

SPREAD_RTOL = 64 * np.finfo(float).eps


def _positive(value: float, name: str) -> None:
    if not value > 0:
        raise InvalidConfig(f"{name} must be positive, got {value}")


def oha(rec: Recording, v_thresh: float) -> float:
    """Fraction of samples with |x| above v_thresh."""
    _positive(v_thresh, "voltage threshold")
    return float(np.mean(np.abs(rec.data) > v_thresh))


def _scale(rec: Recording) -> float:
    return float(np.abs(rec.data).max()) if rec.data.size else 0.0


def _high_variance_ratio(spread: np.ndarray, z_thresh: float, scale: float) -> float:
    # spreads at rounding level of the data count as zero
    spread = np.where(spread <= SPREAD_RTOL * scale, 0.0, spread)
    median = np.median(spread)
    if median == 0:
        return 0.0
    return float(np.mean(spread > z_thresh * median))


def thv(rec: Recording, z_thresh: float) -> float:
    """Fraction of timepoints whose across-channel std exceeds z times the median."""
    _positive(z_thresh, "z threshold")
    return _high_variance_ratio(rec.data.std(axis=0), z_thresh, _scale(rec))


def chv(rec: Recording, z_thresh: float) -> float:
    """Fraction of channels whose std over time exceeds z times the median."""
    _positive(z_thresh, "z threshold")
    return _high_variance_ratio(rec.data.std(axis=1), z_thresh, _scale(rec))


def rbc(bad_channels: Iterable[str], rec: Recording) -> float:
    known = set(rec.channels)
    bad = set(bad_channels)
    for label in sorted(bad):
        if label not in known:
            raise UnknownChannel(label)
    return len(bad) / rec.n_channels


def label(oha_value: float, thv_value: float, chv_value: float, rbc_value: float, thresholds: QcThresholds) -> QcLabel:
    pairs = [
        (oha_value, thresholds.oha),
        (thv_value, thresholds.thv),
        (chv_value, thresholds.chv),
        (rbc_value, thresholds.rbc),
    ]
    if any(value > limits.ok_max for value, limits in pairs):
        return QcLabel.BAD
    if all(value <= limits.good_max for value, limits in pairs):
        return QcLabel.GOOD
    return QcLabel.OK


def temporal_metrics(
    rec: Recording,
    thresholds: Optional[QcThresholds] = None,
    bad_channels: Iterable[str] = (),
) -> TemporalMetrics:
    thresholds = thresholds or QcThresholds.from_settings()
    values = {
        "oha": oha(rec, thresholds.voltage_amplitude_threshold),
        "thv": thv(rec, thresholds.variance_z_threshold),
        "chv": chv(rec, thresholds.variance_z_threshold),
        "rbc": rbc(bad_channels, rec),
    }
    verdict = label(values["oha"], values["thv"], values["chv"], values["rbc"], thresholds)
    result = TemporalMetrics(**values, label=verdict)
    logger.debug("Temporal metrics %s -> %s", values, result.label.value)
    return result
