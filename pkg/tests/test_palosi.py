import numpy as np
import pytest

from app.errors import EmptyBand, ZeroTrace
from app.models import BandSet, QcThresholds
from app.services.cpc import stepwise_cpc
from app.services.palosi import band_mask, band_palosi, palosi, palosi_from_recording
from app.services.recording import with_data

from tests.conftest import make_cross_spectra, random_psd, random_unitary, rank_one_recording, white_recording


def _near_common(rng, n=4, n_freqs=5):
    u = random_unitary(rng, n)
    lam = rng.uniform(0.1, 5.0, (n_freqs, n))
    return np.stack([u @ np.diag(row) @ u.conj().T + 0.1 * random_psd(rng, n) for row in lam])


def _global(matrices):
    cs = make_cross_spectra(matrices)
    return palosi(cs, stepwise_cpc(cs)).global_index


@pytest.mark.parametrize("n_channels", [4, 19, 64])
def test_identity_spectra_floor(n_channels):
    cs = make_cross_spectra(np.repeat(np.eye(n_channels)[None], 3, axis=0))
    result = palosi(cs, stepwise_cpc(cs))
    assert result.global_index == pytest.approx(1.0 / n_channels, abs=1e-9)
    np.testing.assert_allclose(result.per_frequency, 1.0 / n_channels, atol=1e-9)


def test_rank_one_recording_is_fully_parallel(rng):
    result = palosi_from_recording(rank_one_recording(rng))
    assert result.global_index == pytest.approx(1.0, abs=1e-6)
    assert result.flag


def test_white_noise_stays_low(rng):
    n_channels = 8
    result = palosi_from_recording(white_recording(rng, n_channels=n_channels, seconds=300.0))
    assert result.global_index < 2.0 / n_channels + 0.05
    assert not result.flag


def test_scale_invariance_on_recordings(rng):
    rec = white_recording(rng, n_channels=5, seconds=30.0)
    base = palosi_from_recording(rec).global_index
    for factor in (0.25, 2.0, 1024.0):
        scaled = palosi_from_recording(with_data(rec, rec.data * factor)).global_index
        assert scaled == pytest.approx(base, abs=1e-10)


def test_scale_invariance_property(rng):
    for _ in range(1000):
        matrices = _near_common(rng, n=3, n_freqs=3)
        factor = 2.0 ** int(rng.integers(-20, 20))
        assert _global(matrices * factor) == pytest.approx(_global(matrices), abs=1e-10)


def test_permutation_and_unitary_invariance_property(rng):
    for _ in range(200):
        matrices = _near_common(rng)
        base = _global(matrices)
        perm = rng.permutation(4)
        assert _global(matrices[:, perm][:, :, perm]) == pytest.approx(base, abs=1e-6)
        u = random_unitary(rng, 4)
        assert _global(u @ matrices @ u.conj().T) == pytest.approx(base, abs=1e-6)


def test_per_frequency_bounded_by_top_eigenvalue(rng):
    matrices = np.stack([random_psd(rng, 5) for _ in range(6)])
    cs = make_cross_spectra(matrices)
    result = palosi(cs, stepwise_cpc(cs))
    top = np.linalg.eigvalsh(matrices)[:, -1] / np.real(np.trace(matrices, axis1=1, axis2=2))
    assert np.all(result.per_frequency <= top + 1e-12)
    assert 0.0 <= result.global_index <= 1.0


def test_per_channel_sums_to_dominant_power(rng):
    matrices = np.stack([random_psd(rng, 5) for _ in range(6)])
    cs = make_cross_spectra(matrices)
    cpc = stepwise_cpc(cs)
    result = palosi(cs, cpc)
    channel_power = np.real(np.diagonal(matrices, axis1=1, axis2=2)).sum(axis=0)
    dominant = cpc.diagonals.max(axis=1).sum()
    assert (result.per_channel * channel_power).sum() == pytest.approx(dominant, rel=1e-10)


def test_flag_is_strictly_above_threshold():
    cs = make_cross_spectra(np.repeat(np.eye(2)[None], 2, axis=0))
    cpc = stepwise_cpc(cs)
    assert not palosi(cs, cpc, QcThresholds(palosi_flag=0.51)).flag
    assert palosi(cs, cpc, QcThresholds(palosi_flag=0.49)).flag


def test_zero_trace_frequency(rng):
    matrices = np.stack([random_psd(rng, 3), np.zeros((3, 3)), random_psd(rng, 3)])
    cs = make_cross_spectra(matrices)
    with pytest.raises(ZeroTrace) as info:
        palosi(cs, stepwise_cpc(cs))
    assert info.value.freq == pytest.approx(cs.freqs[1])


def test_band_mask_is_half_open():
    freqs = np.arange(1.0, 30.5, 0.5)
    selected = freqs[band_mask(freqs, (8.0, 13.0))]
    assert selected[0] == 8.0
    assert selected[-1] == 12.5


def test_band_palosi(rng):
    freqs = np.arange(1.0, 30.5, 0.5)
    matrices = np.stack([random_psd(rng, 4) for _ in freqs])
    cs = make_cross_spectra(matrices, freqs)
    cpc = stepwise_cpc(cs)
    values = band_palosi(cs, cpc)
    assert list(values) == BandSet().names
    assert all(0.0 <= v <= 1.0 for v in values.values())
    with pytest.raises(EmptyBand):
        palosi(cs, cpc, band=(40.0, 45.0))
