"""PaLOS index: share of total cross-spectral power carried by the dominant common component."""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from app.errors import EmptyBand, ZeroTrace
from app.models import BandSet, CpcResult, CrossSpectra, PalosIndices, QcThresholds, Recording, SpectralConfig
from app.services.cpc import stepwise_cpc
from app.services.recording import validate_recording
from app.services.spectra import cross_spectra_from_recording

logger = logging.getLogger(__name__)

FREQ_EPS = 1e-9


def band_mask(freqs: np.ndarray, band: Tuple[float, float]) -> np.ndarray:
    lo, hi = band
    return (freqs >= lo - FREQ_EPS) & (freqs < hi - FREQ_EPS)


def palosi(
    cs: CrossSpectra,
    cpc: CpcResult,
    thresholds: Optional[QcThresholds] = None,
    band: Optional[Tuple[float, float]] = None,
) -> PalosIndices:
    """Global, per-frequency and per-channel PaLOS indices.

    With ``band`` only the frequency bins in [lo, hi) enter the sums.
    """
    thresholds = thresholds or QcThresholds.from_settings()
    traces = cs.traces()
    freqs = cs.freqs
    diagonals = cpc.diagonals
    auto = np.real(np.diagonal(cs.matrices, axis1=1, axis2=2))

    if band is not None:
        keep = band_mask(freqs, band)
        if not keep.any():
            raise EmptyBand(f"[{band[0]:g}, {band[1]:g})")
        traces, freqs, diagonals, auto = traces[keep], freqs[keep], diagonals[keep], auto[keep]

    zero = np.flatnonzero(traces <= 0)
    if zero.size:
        raise ZeroTrace(float(freqs[zero[0]]))

    # argmax returns the first maximum, so ties go to the lowest component index
    best = np.argmax(diagonals, axis=1)
    dominant = diagonals[np.arange(diagonals.shape[0]), best]

    global_index = float(np.clip(dominant.sum() / traces.sum(), 0.0, 1.0))
    per_frequency = np.clip(dominant / traces, 0.0, 1.0)

    loadings = np.abs(cpc.gamma[:, best]) ** 2  # channels x freqs
    channel_power = auto.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_channel = np.where(channel_power > 0, (loadings * dominant).sum(axis=1) / channel_power, 0.0)

    return PalosIndices(
        global_index=global_index,
        per_frequency=per_frequency,
        per_channel=per_channel,
        freqs=freqs,
        channels=list(cs.channels),
        flag=global_index > thresholds.palosi_flag,
        threshold=thresholds.palosi_flag,
    )


def band_palosi(cs: CrossSpectra, cpc: CpcResult, bands: Optional[BandSet] = None) -> Dict[str, float]:
    bands = bands or BandSet()
    return {name: palosi(cs, cpc, band=bands.edges(name)).global_index for name in bands.names}


def palosi_from_recording(
    rec: Recording,
    cfg: Optional[SpectralConfig] = None,
    thresholds: Optional[QcThresholds] = None,
    n_components: Optional[int] = None,
) -> PalosIndices:
    rec = validate_recording(rec)
    cfg = cfg or SpectralConfig.from_settings()
    cs = cross_spectra_from_recording(rec, cfg)
    cpc = stepwise_cpc(cs, n_components=n_components)
    result = palosi(cs, cpc, thresholds)
    logger.info("PaLOSi %.6f over %d channels, %d segments", result.global_index, rec.n_channels, cs.n_segments)
    return result
