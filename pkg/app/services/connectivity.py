"""Coherence networks, edge-weight histograms, Shannon entropy and network similarity."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from app.errors import EmptyBand, EmptyNetwork, ShapeMismatch, ZeroPower
from app.models import BandSet, CrossSpectra, Network, WeightHistogram
from app.services.palosi import band_mask

logger = logging.getLogger(__name__)

N_BINS = 20
HISTOGRAM_EDGES = np.linspace(0.0, 1.0, N_BINS + 1)


def coherence(cs: CrossSpectra) -> List[Network]:
    """Magnitude coherence |S_ij| / sqrt(S_ii S_jj), one network per frequency bin."""
    power = np.real(np.diagonal(cs.matrices, axis1=1, axis2=2))
    bad = np.argwhere(power <= 0)
    if bad.size:
        f_idx, c_idx = bad[0]
        raise ZeroPower(cs.channels[c_idx], float(cs.freqs[f_idx]))

    norm = np.sqrt(power[:, :, None] * power[:, None, :])
    weights = np.clip(np.abs(cs.matrices) / norm, 0.0, 1.0)
    idx = np.arange(cs.n_channels)
    weights[:, idx, idx] = 0.0
    # |S_ij| == |S_ji| holds exactly only up to rounding
    weights = 0.5 * (weights + np.swapaxes(weights, 1, 2))

    return [
        Network(weights=w, labels=list(cs.channels), frequency=float(f))
        for w, f in zip(weights, cs.freqs)
    ]


def band_network(networks: List[Network], band: Tuple[float, float], name: Optional[str] = None) -> Network:
    label = name or f"[{band[0]:g}, {band[1]:g})"
    if not networks:
        raise EmptyBand(label)
    freqs = np.array([net.frequency for net in networks], dtype=float)
    keep = np.flatnonzero(band_mask(freqs, band))
    if keep.size == 0:
        raise EmptyBand(label)
    stack = np.stack([networks[i].weights for i in keep])
    return Network(weights=stack.mean(axis=0), labels=list(networks[0].labels), band=label)


def network_at(networks: List[Network], freq_hz: float) -> Network:
    """Single-frequency network nearest to freq_hz."""
    if not networks:
        raise EmptyBand(f"{freq_hz:g} Hz")
    freqs = np.array([net.frequency for net in networks], dtype=float)
    return networks[int(np.argmin(np.abs(freqs - freq_hz)))]


def band_networks(cs: CrossSpectra, bands: Optional[BandSet] = None) -> Dict[str, Network]:
    bands = bands or BandSet()
    per_freq = coherence(cs)
    return {name: band_network(per_freq, bands.edges(name), name) for name in bands.names}


def _upper_weights(net: Network) -> np.ndarray:
    rows, cols = np.triu_indices(net.n_nodes, k=1)
    return net.weights[rows, cols]


def weight_histogram(net: Network) -> WeightHistogram:
    values = _upper_weights(net)
    if values.size == 0:
        raise EmptyNetwork()
    # np.histogram closes the last bin, matching [k/20, (k+1)/20) with 1.0 in bin 19
    counts, edges = np.histogram(values, bins=HISTOGRAM_EDGES)
    return WeightHistogram(counts=counts, probabilities=counts / counts.sum(), edges=edges)


def pooled_histogram(networks: List[Network]) -> WeightHistogram:
    values = np.concatenate([_upper_weights(net) for net in networks]) if networks else np.empty(0)
    if values.size == 0:
        raise EmptyNetwork()
    counts, edges = np.histogram(values, bins=HISTOGRAM_EDGES)
    return WeightHistogram(counts=counts, probabilities=counts / counts.sum(), edges=edges)


def shannon_entropy(net: Network) -> float:
    """Normalised entropy of the 20-bin edge-weight histogram, in [0, 1]."""
    probabilities = weight_histogram(net).probabilities
    value = stats.entropy(probabilities, base=2) / np.log2(N_BINS)
    return float(np.clip(value, 0.0, 1.0))


def network_similarity(net_a: Network, net_b: Network) -> float:
    if net_a.weights.shape != net_b.weights.shape:
        raise ShapeMismatch(f"networks have shapes {net_a.weights.shape} and {net_b.weights.shape}")
    if list(net_a.labels) != list(net_b.labels):
        raise ShapeMismatch("networks are labelled differently")
    distance = float(np.abs(_upper_weights(net_a) - _upper_weights(net_b)).sum())
    return 1.0 / (1.0 + distance)


def write_network_csv(net: Network, path: Path) -> None:
    frame = pd.DataFrame(net.weights, index=net.labels, columns=net.labels)
    frame.to_csv(path, float_format="%.17g", index_label="channel")
    logger.info("Wrote %dx%d network to %s", net.n_nodes, net.n_nodes, path)
