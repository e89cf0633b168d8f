import numpy as np
import pytest

from app.config import get_settings
from app.models import CrossSpectra, Recording


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    for key in ("PALOSI_F_MAX", "PALOSI_PALOSI_FLAG", "PALOSI_MAX_WORKERS"):
        monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def labels(n):
    return [f"E{i + 1:02d}" for i in range(n)]


def white_recording(rng, n_channels=8, seconds=20.0, fs=100.0, scale=10.0, **fields):
    data = scale * rng.standard_normal((n_channels, int(seconds * fs)))
    return Recording(data=data, fs=fs, channels=labels(n_channels), **fields)


def rank_one_recording(rng, n_channels=6, seconds=20.0, fs=100.0, scale=10.0):
    gains = np.linspace(0.5, 1.5, n_channels)
    signal = scale * rng.standard_normal(int(seconds * fs))
    return Recording(data=np.outer(gains, signal), fs=fs, channels=labels(n_channels))


def make_cross_spectra(matrices, freqs=None):
    matrices = np.asarray(matrices, dtype=complex)
    if freqs is None:
        freqs = 1.0 + 0.5 * np.arange(matrices.shape[0])
    return CrossSpectra(matrices=matrices, freqs=freqs, n_segments=2, channels=labels(matrices.shape[1]))


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_psd(rng, n, rank=None):
    rank = rank or n
    a = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return a @ a.conj().T
