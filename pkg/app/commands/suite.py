from pathlib import Path

import click

from app.deps import echo_kv, get_spectral_config, get_workers
from app.models import DegradationConfig
from app.services.degradation import run_suite, write_suite


@click.group("suite")
def group():
    """Simulation suites."""


@group.command("degradation")
@click.option("--datasets", type=int, default=50, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--duration", type=float, default=60.0, show_default=True)
@click.option("--fs", type=float, default=100.0, show_default=True)
@click.option("--sources", "n_sources", type=int, default=103, show_default=True)
@click.option("--workers", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
def degradation(datasets, seed, out_dir, duration, fs, n_sources, workers, config_path):
    """GT -> CE -> ICA -> EPE sweep with sLORETA reconstructions."""
    cfg = DegradationConfig(
        n_datasets=datasets,
        seed=seed,
        duration_s=duration,
        fs=fs,
        n_sources=n_sources,
        max_workers=get_workers(workers),
    )
    outcomes, summary = run_suite(cfg, spectral=get_spectral_config(config_path))
    paths = write_suite(outcomes, summary, out_dir)

    echo_kv("datasets", summary.n_datasets)
    echo_kv("median_spearman", summary.median_spearman)
    echo_kv("fraction_source_below_scalp", summary.fraction_source_below_scalp)
    for name, value in summary.median_palosi.items():
        echo_kv(f"median_palosi_{name}", value)
    for key, value in summary.median_similarity.items():
        echo_kv(f"median_similarity_{key}", value)
    echo_kv("summary", paths["summary"])
