from pathlib import Path

import click

from app.deps import echo_kv
from app.services.ica import fastica, remove_components
from app.services.palosi import palosi_from_recording
from app.services.recording import with_data
from app.services.recording_io import read_recording, write_recording


@click.command("degrade")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--keep-top", type=int, required=True, help="Independent components kept (highest explained variance).")
@click.option("--seed", type=int, required=True)
@click.option("--n-components", type=int, default=None, help="ICA components (default: data rank).")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(["f64", "csv"]), default="f64", show_default=True)
def command(path, keep_top, seed, n_components, out_path, fmt):
    """Excessive preprocessing: FastICA, then back-project only the top components."""
    rec = read_recording(path)
    model = fastica(rec, n_components=n_components, seed=seed)
    degraded = remove_components(model, keep_top, base=rec)
    provenance = {**rec.provenance, "ica_seed": seed, "ica_components": model.n_components, "kept": keep_top}
    degraded = with_data(rec, degraded.data, provenance=provenance)

    echo_kv("recording", write_recording(degraded, out_path, fmt))
    echo_kv("components", model.n_components)
    echo_kv("kept_variance", float(model.explained_variance[:keep_top].sum()))
    echo_kv("palosi_before", palosi_from_recording(rec).global_index)
    echo_kv("palosi_after", palosi_from_recording(degraded).global_index)
