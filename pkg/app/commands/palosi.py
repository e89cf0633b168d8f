from pathlib import Path

import click

from app.deps import echo_kv, get_spectral_config, get_thresholds
from app.services.palosi import palosi_from_recording
from app.services.recording_io import read_recording


@click.command("palosi")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--per-channel", is_flag=True, help="Print the channel-wise index.")
@click.option("--per-frequency", is_flag=True, help="Print the frequency-wise index.")
@click.option("--components", type=int, default=None, help="CPC components (default: all, exact value).")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--thresholds", "thresholds_path", type=click.Path(exists=True, path_type=Path))
def command(path, per_channel, per_frequency, components, config_path, thresholds_path):
    """Global PaLOS index of one recording."""
    rec = read_recording(path)
    result = palosi_from_recording(rec, get_spectral_config(config_path), get_thresholds(thresholds_path), components)

    echo_kv("global", result.global_index)
    echo_kv("flagged", str(result.flag).lower())
    if per_frequency:
        for freq, value in zip(result.freqs, result.per_frequency):
            click.echo(f"freq {freq:g} {value:.6f}")
    if per_channel:
        for label, value in zip(result.channels, result.per_channel):
            click.echo(f"channel {label} {value:.6f}")
