import logging
from pathlib import Path

import click

from app.deps import echo_kv, get_spectral_config, get_thresholds, get_workers, write_bytes
from app.services.batch import run_batch, write_batch
from app.services.pdf_report import generate_qc_pdf
from app.services.recording_io import discover_recordings, read_recording
from app.services.spectra import cross_spectra_from_recording, log_power_spectra

logger = logging.getLogger(__name__)


@click.command("qc")
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), help="SpectralConfig JSON.")
@click.option("--thresholds", "thresholds_path", type=click.Path(exists=True, path_type=Path), help="QcThresholds JSON.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("qc-out"), show_default=True)
@click.option("--workers", type=int, default=None, help="Parallel recordings (default PALOSI_MAX_WORKERS).")
@click.option("--pdf", "pdf_path", type=click.Path(path_type=Path), default=None, help="Also render a PDF summary.")
@click.pass_context
def command(ctx, paths, config_path, thresholds_path, out_dir, workers, pdf_path):
    """Quality reports for recordings (sidecar JSON files or directories of them)."""
    cfg = get_spectral_config(config_path)
    thresholds = get_thresholds(thresholds_path)
    files = discover_recordings(list(paths))
    if not files:
        raise click.UsageError("no recording headers found")

    result = run_batch(files, cfg, thresholds, max_workers=get_workers(workers))
    outputs = write_batch(result, out_dir)

    summary = result.summary
    for report in result.reports:
        click.echo(f"{report.recording_id} {report.temporal.label.value} {report.palosi.global_index:.6f}"
                   f"{' flagged' if report.palosi.flag else ''}")
    for error in result.errors:
        click.echo(f"{error.recording_id} ERROR {error.reason}")
    echo_kv("processed", summary.n_processed)
    echo_kv("failed", summary.n_failed)
    echo_kv("fraction_flagged", summary.fraction_flagged)
    echo_kv("aggregate", outputs["aggregate"])

    if pdf_path is not None:
        log_power = freqs = None
        if len(result.reports) == 1:
            only = result.reports[0]
            source = next(f for f in files if f.stem == only.recording_id)
            cs = cross_spectra_from_recording(read_recording(source), cfg)
            log_power, freqs = log_power_spectra(cs), cs.freqs
        write_bytes(generate_qc_pdf(result.reports, result.summary, log_power, freqs), pdf_path)
        echo_kv("pdf", pdf_path)

    if result.all_failed:
        ctx.exit(1)
