"""Welch segmentation, windowed Fourier series and cross-spectral matrices."""

import logging
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft, signal

from app.errors import EigenFailure, InvalidConfig, TooFewSegments, ZeroPower
from app.models import CrossSpectra, FourierSeries, PerFrequencyPca, Recording, SpectralConfig

logger = logging.getLogger(__name__)

SCIPY_WINDOWS = {"hann": "hann", "hamming": "hamming", "rect": "boxcar"}
FREQ_EPS = 1e-9


def segment_length(fs: float, cfg: SpectralConfig) -> int:
    return int(round(cfg.segment_seconds * fs))


def count_segments(n_samples: int, fs: float, cfg: SpectralConfig) -> int:
    nperseg = segment_length(fs, cfg)
    step = max(1, nperseg - int(round(cfg.overlap_fraction * nperseg)))
    if n_samples < nperseg:
        return 0
    return (n_samples - nperseg) // step + 1


def segment_and_window(rec: Recording, cfg: SpectralConfig) -> FourierSeries:
    fs = rec.fs
    nperseg = segment_length(fs, cfg)
    if nperseg < 2:
        raise InvalidConfig(f"segment of {cfg.segment_seconds} s at {fs} Hz is shorter than 2 samples")
    if cfg.f_max > fs / 2 + FREQ_EPS:
        raise InvalidConfig(f"f_max ({cfg.f_max} Hz) exceeds the Nyquist frequency ({fs / 2} Hz)")

    step = max(1, nperseg - int(round(cfg.overlap_fraction * nperseg)))
    n_segments = count_segments(rec.n_samples, fs, cfg)
    if n_segments < 2:
        raise TooFewSegments(n_segments)

    # channels x segments x samples; tail shorter than a segment is dropped
    segments = sliding_window_view(rec.data, nperseg, axis=1)[:, ::step][:, :n_segments]
    if cfg.detrend == "demean":
        segments = signal.detrend(segments, axis=-1, type="constant")

    window = signal.get_window(SCIPY_WINDOWS[cfg.window], nperseg)
    spectrum = fft.rfft(segments * window, axis=-1)
    freqs = fft.rfftfreq(nperseg, d=1.0 / fs)

    keep = (freqs >= cfg.f_min - FREQ_EPS) & (freqs <= cfg.f_max + FREQ_EPS)
    if not keep.any():
        raise InvalidConfig(f"no frequency bins in [{cfg.f_min}, {cfg.f_max}] Hz at resolution {fs / nperseg} Hz")

    # one-sided PSD density scaling, DC and Nyquist bins are not doubled
    window_norm = 1.0 / (fs * float(np.sum(window**2)))
    sided = np.full(freqs.shape, 2.0)
    sided[0] = 1.0
    if nperseg % 2 == 0:
        sided[-1] = 1.0
    gain = np.sqrt(window_norm * sided[keep])

    coefficients = np.moveaxis(spectrum[..., keep] * gain, -1, 0)
    logger.debug("Segmented %d channels into %d segments of %d samples", rec.n_channels, n_segments, nperseg)
    return FourierSeries(
        coefficients=coefficients,
        freqs=freqs[keep],
        window_norm=window_norm,
        channels=list(rec.channels),
        fs=fs,
    )


def cross_spectra(fourier: FourierSeries) -> CrossSpectra:
    phi = fourier.coefficients
    n_segments = phi.shape[2]
    if n_segments < 2:
        raise TooFewSegments(n_segments)
    matrices = np.einsum("fes,fds->fed", phi, phi.conj()) / n_segments
    matrices = 0.5 * (matrices + np.conj(np.swapaxes(matrices, 1, 2)))
    return CrossSpectra(
        matrices=matrices,
        freqs=fourier.freqs,
        n_segments=n_segments,
        channels=list(fourier.channels),
    )


def cross_spectra_from_recording(rec: Recording, cfg: SpectralConfig) -> CrossSpectra:
    return cross_spectra(segment_and_window(rec, cfg))


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real and positive."""
    v = np.array(vectors, dtype=np.complex128)
    mags = np.abs(v)
    cutoff = 1e-12 * mags.max(axis=-2, keepdims=True)
    first = np.argmax(mags > cutoff, axis=-2)
    pivot = np.take_along_axis(v, first[..., None, :], axis=-2)
    size = np.abs(pivot)
    phase = np.where(size > 0, pivot / np.where(size > 0, size, 1.0), 1.0)
    return v * np.conj(phase)


def per_frequency_pca(cs: CrossSpectra, fourier: Optional[FourierSeries] = None) -> PerFrequencyPca:
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(cs.matrices)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"Hermitian eigendecomposition failed: {exc}") from exc

    eigenvalues = np.maximum(eigenvalues[:, ::-1], 0.0)
    eigenvectors = fix_phase(eigenvectors[:, :, ::-1])

    components = None
    if fourier is not None:
        components = np.conj(np.swapaxes(eigenvectors, 1, 2)) @ fourier.coefficients

    return PerFrequencyPca(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        components=components,
        freqs=cs.freqs,
    )


def log_power_spectra(cs: CrossSpectra) -> np.ndarray:
    """log10 auto-spectra, channels x freqs."""
    power = np.real(np.diagonal(cs.matrices, axis1=1, axis2=2))
    bad = np.argwhere(power <= 0)
    if bad.size:
        f_idx, c_idx = bad[0]
        raise ZeroPower(cs.channels[c_idx], float(cs.freqs[f_idx]))
    return np.log10(power).T
