from pathlib import Path

import click

from app.deps import echo_kv
from app.services.inverse import apply_inverse, sloreta_operator
from app.services.recording import with_data
from app.services.recording_io import read_leadfield, read_recording, write_recording


@click.command("inverse")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--leadfield", "leadfield_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--alpha", type=float, default=None, help="Regularisation (default 0.05 * tr(LL^T) / N_e).")
@click.option("--unstandardized", is_flag=True, help="Write minimum-norm instead of sLORETA estimates.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(["f64", "csv"]), default="f64", show_default=True)
def command(path, leadfield_path, alpha, unstandardized, out_path, fmt):
    """sLORETA source time series of a recording."""
    rec = read_recording(path)
    operator = sloreta_operator(read_leadfield(leadfield_path), alpha)
    sources = apply_inverse(operator, rec, standardized=not unstandardized)
    method = "minimum-norm" if unstandardized else "sLORETA"
    out = with_data(
        rec,
        sources,
        channels=list(operator.source_labels),
        units="nAm" if unstandardized else "au",
        reference="none",
        bad_channels=[],
        provenance={**rec.provenance, "inverse": method, "alpha": operator.alpha},
    )
    echo_kv("sources", write_recording(out, out_path, fmt))
    echo_kv("alpha", operator.alpha)
