from pathlib import Path

import click

from app.deps import echo_kv, get_spectral_config
from app.models import BandSet
from app.services.connectivity import band_network, coherence, network_at, shannon_entropy, write_network_csv
from app.services.recording_io import read_recording
from app.services.spectra import cross_spectra_from_recording


@click.command("connectivity")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--band", type=click.Choice(list(BandSet().names)), required=True)
@click.option("--freq", type=float, default=None, help="Single-frequency network instead of the band mean.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="Adjacency CSV.")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def command(path, band, freq, out_path, config_path):
    """Coherence network of a band (or one frequency) with its weight entropy."""
    rec = read_recording(path)
    networks = coherence(cross_spectra_from_recording(rec, get_spectral_config(config_path)))
    if freq is not None:
        net = network_at(networks, freq)
    else:
        net = band_network(networks, BandSet().edges(band), band)

    write_network_csv(net, out_path)
    echo_kv("band", band)
    if freq is not None:
        echo_kv("frequency", float(net.frequency))
    echo_kv("entropy", shannon_entropy(net))
    echo_kv("network", out_path)
