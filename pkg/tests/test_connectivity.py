import numpy as np
import pandas as pd
import pytest

from app.errors import EmptyBand, EmptyNetwork, ShapeMismatch, ZeroPower
from app.models import Network, Recording, SpectralConfig
from app.services.connectivity import (
    band_network,
    band_networks,
    coherence,
    network_at,
    network_similarity,
    pooled_histogram,
    shannon_entropy,
    weight_histogram,
    write_network_csv,
)
from app.services.spectra import cross_spectra_from_recording

from tests.conftest import labels, make_cross_spectra, random_psd, white_recording


def _network(edge_weights, n_nodes):
    weights = np.zeros((n_nodes, n_nodes))
    rows, cols = np.triu_indices(n_nodes, k=1)
    weights[rows, cols] = edge_weights
    weights[cols, rows] = edge_weights
    return Network(weights=weights, labels=labels(n_nodes))


def test_scaled_channel_is_fully_coherent(rng):
    x = rng.standard_normal(3000)
    rec = Recording(data=np.vstack([x, 3 * x]), fs=100.0, channels=labels(2))
    for net in coherence(cross_spectra_from_recording(rec, SpectralConfig())):
        assert net.weights[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert net.weights[0, 0] == 0.0


def test_rank_one_spectra_are_fully_coherent(rng):
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    nets = coherence(make_cross_spectra([np.outer(v, v.conj())] * 3))
    off = ~np.eye(4, dtype=bool)
    for net in nets:
        np.testing.assert_allclose(net.weights[off], 1.0, atol=1e-12)


def test_independent_noise_has_low_coherence(rng):
    rec = white_recording(rng, n_channels=6, seconds=300.0)
    nets = coherence(cross_spectra_from_recording(rec, SpectralConfig()))
    off = ~np.eye(6, dtype=bool)
    assert np.mean([net.weights[off].mean() for net in nets]) < 0.15


def test_coherence_is_bounded_and_symmetric(rng):
    for _ in range(1000):
        nets = coherence(make_cross_spectra([random_psd(rng, 4, rank=2)]))
        w = nets[0].weights
        assert np.all((w >= 0) & (w <= 1))
        assert np.array_equal(w, w.T)


def test_coherence_rejects_dead_channel():
    with pytest.raises(ZeroPower):
        coherence(make_cross_spectra([np.diag([1.0, 0.0, 2.0])]))


def _per_frequency(values_by_freq, n_nodes=3):
    return [
        Network(weights=np.full((n_nodes, n_nodes), value) * (1 - np.eye(n_nodes)), labels=labels(n_nodes), frequency=f)
        for f, value in values_by_freq.items()
    ]


def test_band_network_averages_half_open_band():
    freqs = np.arange(1.0, 30.5, 0.5)
    nets = _per_frequency({f: f / 100.0 for f in freqs})
    alpha = band_network(nets, (8.0, 13.0), "alpha")
    expected = np.arange(8.0, 13.0, 0.5).mean() / 100.0
    assert alpha.weights[0, 1] == pytest.approx(expected)
    assert alpha.band == "alpha"


def test_band_network_constant_over_band():
    nets = _per_frequency({f: 0.42 for f in np.arange(1.0, 10.0, 0.5)})
    assert np.allclose(band_network(nets, (4.0, 8.0)).weights, nets[0].weights)


def test_band_network_without_bins():
    with pytest.raises(EmptyBand):
        band_network(_per_frequency({1.0: 0.5, 1.5: 0.5}), (13.0, 30.0))


def test_network_at_nearest_frequency():
    nets = _per_frequency({f: f for f in (9.5, 10.0, 10.5)})
    assert network_at(nets, 10.1).frequency == 10.0


def test_band_networks_cover_default_bands(rng):
    rec = white_recording(rng, n_channels=4, seconds=20.0)
    nets = band_networks(cross_spectra_from_recording(rec, SpectralConfig()))
    assert list(nets) == ["delta", "theta", "alpha", "beta"]


def test_entropy_uniform_histogram_is_one():
    # 16 nodes give 120 edges, six per bin
    weights = np.repeat((np.arange(20) + 0.5) / 20, 6)
    assert shannon_entropy(_network(weights, 16)) == pytest.approx(1.0)


def test_entropy_single_bin_is_zero():
    assert shannon_entropy(_network(np.full(10, 0.73), 5)) == 0.0


def test_entropy_two_equal_bins():
    weights = np.array([0.12] * 5 + [0.83] * 5)
    assert shannon_entropy(_network(weights, 5)) == pytest.approx(1 / np.log2(20))
    assert 1 / np.log2(20) == pytest.approx(0.2314, abs=1e-4)


def test_histogram_puts_one_in_last_bin():
    hist = weight_histogram(_network(np.ones(3), 3))
    assert hist.counts[-1] == 3
    assert hist.probabilities.sum() == pytest.approx(1.0)


def test_pooled_histogram_counts_every_edge():
    hist = pooled_histogram([_network(np.full(3, 0.1), 3), _network(np.full(6, 0.77), 4)])
    assert hist.counts.sum() == 9
    assert hist.counts[15] == 6


def test_entropy_needs_edges():
    with pytest.raises(EmptyNetwork):
        shannon_entropy(Network(weights=np.zeros((1, 1)), labels=["Cz"]))


def test_similarity_examples():
    a = _network([0.5], 2)
    assert network_similarity(a, a) == 1.0
    assert network_similarity(_network([0.0], 2), _network([1.0], 2)) == pytest.approx(0.5)
    assert network_similarity(_network([0.5], 2), _network([0.75], 2)) == pytest.approx(0.8)


def test_similarity_is_symmetric(rng):
    a = _network(rng.uniform(0, 1, 6), 4)
    b = _network(rng.uniform(0, 1, 6), 4)
    assert network_similarity(a, b) == network_similarity(b, a)
    assert 0 < network_similarity(a, b) <= 1


def test_similarity_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        network_similarity(_network([0.5], 2), _network([0.5, 0.5, 0.5], 3))


def test_network_csv(tmp_path, rng):
    net = _network(rng.uniform(0, 1, 3), 3)
    path = tmp_path / "alpha.csv"
    write_network_csv(net, path)
    frame = pd.read_csv(path, index_col=0, float_precision="round_trip")
    assert list(frame.columns) == net.labels
    np.testing.assert_array_equal(frame.to_numpy(), net.weights)
