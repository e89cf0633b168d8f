from pathlib import Path

import click

from app.deps import echo_kv, write_json
from app.services.head_model import default_head, grid_labels, hemisphere_grid, spherical_leadfield
from app.services.recording import with_data
from app.services.recording_io import MANIFEST_SUFFIX, header_path, write_leadfield, write_recording
from app.services.simulation import scenario_preset, simulate_scenario


@click.command("simulate")
@click.option("--scenario", type=click.Choice(["A", "B", "C", "D"], case_sensitive=False), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--duration", type=float, default=60.0, show_default=True, help="Seconds.")
@click.option("--fs", type=float, default=100.0, show_default=True, help="Sampling rate in Hz.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="Recording sidecar path.")
@click.option("--format", "fmt", type=click.Choice(["f64", "csv"]), default="f64", show_default=True)
@click.option("--sources-out", type=click.Path(path_type=Path), default=None, help="Also write the source signals.")
@click.option("--leadfield-out", type=click.Path(path_type=Path), default=None, help="Scenario leadfield CSV.")
@click.option("--grid-out", type=click.Path(path_type=Path), default=None, help="Hemisphere-grid leadfield CSV.")
@click.option("--grid-size", type=int, default=103, show_default=True)
def command(scenario, seed, duration, fs, out_path, fmt, sources_out, leadfield_out, grid_out, grid_size):
    """Noiseless scalp recording of a preset dipole scenario."""
    head = default_head()
    rec, sources, manifest = simulate_scenario(scenario, seed, duration, fs, head)

    sidecar = write_recording(rec, out_path, fmt)
    manifest_path = write_json(manifest, sidecar.with_name(sidecar.stem + MANIFEST_SUFFIX))
    echo_kv("recording", sidecar)
    echo_kv("manifest", manifest_path)
    echo_kv("mean_coherence", manifest.measured_coherence)

    if sources_out is not None:
        labels = [f"D{i + 1:03d}" for i in range(sources.shape[0])]
        source_rec = with_data(rec, sources, channels=labels, units="nAm")
        echo_kv("sources", write_recording(source_rec, header_path(sources_out), fmt))
    if leadfield_out is not None:
        echo_kv("leadfield", write_leadfield(spherical_leadfield(head, scenario_preset(scenario)), leadfield_out))
    if grid_out is not None:
        grid = spherical_leadfield(head, hemisphere_grid(head, grid_size), labels=grid_labels(grid_size))
        echo_kv("grid_leadfield", write_leadfield(grid, grid_out))
