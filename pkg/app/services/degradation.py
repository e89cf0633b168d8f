"""Degradation suite: ground-truth sources, clean EEG, IC removal and source reconstruction.

For each simulated dataset the suite builds ground-truth (GT) sources on a hemisphere
grid, projects them to clean scalp EEG (CE), decomposes CE with FastICA and sweeps the
number of removed low-variance components. The first sweep point whose scalp PaLOSi
exceeds the EPE threshold is the excessively preprocessed EEG (EPE). SCE and SEPE are
the sLORETA reconstructions of CE and EPE.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, signal, stats

from app.errors import TargetUnreachable
from app.models import (
    BandSet,
    CrossSpectra,
    DatasetOutcome,
    DegradationConfig,
    HeadModel,
    InverseOperator,
    Leadfield,
    QcThresholds,
    Recording,
    SpectralConfig,
    SuiteSummary,
    SweepPoint,
)
from app.services.connectivity import (
    HISTOGRAM_EDGES,
    band_networks,
    coherence,
    network_at,
    network_similarity,
    shannon_entropy,
    weight_histogram,
)
from app.services.cpc import stepwise_cpc
from app.services.head_model import default_head, grid_labels, hemisphere_grid, spherical_leadfield
from app.services.ica import fastica, remove_components
from app.services.inverse import sloreta_operator, source_cross_spectra
from app.services.palosi import palosi
from app.services.spectra import cross_spectra, cross_spectra_from_recording, segment_and_window

logger = logging.getLogger(__name__)

MOMENT_NAM = 100.0
DRIVER_BAND_HZ = (8.0, 12.0)
PRIVATE_CENTRE_HZ = (2.0, 28.0)
PRIVATE_WIDTH_HZ = (2.0, 8.0)
FILTER_ORDER = 4
GT_WEIGHT_XTOL = 1e-3


def _bandlimited(rng: np.random.Generator, n_samples: int, fs: float, band: Tuple[float, float]) -> np.ndarray:
    sos = signal.butter(FILTER_ORDER, band, btype="bandpass", fs=fs, output="sos")
    trace = signal.sosfiltfilt(sos, rng.standard_normal(n_samples))
    return trace / trace.std()


def _private_sources(rng: np.random.Generator, n_sources: int, n_samples: int, fs: float) -> np.ndarray:
    nyquist = fs / 2
    rows = []
    for _ in range(n_sources):
        centre = rng.uniform(*PRIVATE_CENTRE_HZ)
        half = rng.uniform(*PRIVATE_WIDTH_HZ) / 2
        band = (max(0.5, centre - half), min(nyquist * 0.95, centre + half))
        rows.append(_bandlimited(rng, n_samples, fs, band))
    return np.vstack(rows)


def _blend(driver: np.ndarray, private: np.ndarray, weight: float) -> np.ndarray:
    return MOMENT_NAM * (np.sqrt(weight) * driver[None, :] + np.sqrt(1.0 - weight) * private)


def _palosi_of(cs: CrossSpectra, n_components: Optional[int], thresholds: QcThresholds) -> float:
    k = None if n_components is None else min(n_components, cs.n_channels)
    return palosi(cs, stepwise_cpc(cs, n_components=k), thresholds).global_index


def _source_recording(data: np.ndarray, fs: float, labels: List[str]) -> Recording:
    return Recording(data=data, fs=fs, channels=labels, reference="none", units="nAm")


def ground_truth_sources(
    cfg: DegradationConfig,
    rng: np.random.Generator,
    spectral: SpectralConfig,
    thresholds: QcThresholds,
) -> Tuple[np.ndarray, float, float, int]:
    """GT sources whose (lower-bound) PaLOSi lands in the configured range.

    Returns sources, blend weight, GT PaLOSi and the number of attempts used.
    """
    n_samples = int(round(cfg.duration_s * cfg.fs))
    labels = grid_labels(cfg.n_sources)
    lo, hi = cfg.gt_palosi_range

    for attempt in range(1, cfg.max_attempts + 1):
        driver = _bandlimited(rng, n_samples, cfg.fs, DRIVER_BAND_HZ)
        private = _private_sources(rng, cfg.n_sources, n_samples, cfg.fs)

        # segmentation, windowing and the FFT are linear, so blends mix Fourier coefficients
        stacked = _source_recording(np.vstack([driver, private]), cfg.fs, ["driver", *labels])
        fourier = segment_and_window(stacked, spectral)
        common = fourier.coefficients[:, :1]
        own = fourier.coefficients[:, 1:]
        cache: Dict[float, float] = {}

        def gt_palosi(weight: float) -> float:
            if weight not in cache:
                coefficients = MOMENT_NAM * (np.sqrt(weight) * common + np.sqrt(1.0 - weight) * own)
                blended = fourier.model_copy(update={"coefficients": coefficients, "channels": labels})
                cache[weight] = _palosi_of(cross_spectra(blended), cfg.gt_cpc_components, thresholds)
            return cache[weight]

        def excess(weight: float) -> float:
            return gt_palosi(weight) - cfg.gt_palosi_target

        if excess(0.0) >= 0:
            weight = 0.0
        else:
            weight = float(optimize.brentq(excess, 0.0, 1.0, xtol=GT_WEIGHT_XTOL))
        value = gt_palosi(weight)
        if lo <= value <= hi:
            return _blend(driver, private, weight), weight, value, attempt
        logger.warning("GT PaLOSi %.3f outside [%.2f, %.2f] on attempt %d, resampling", value, lo, hi, attempt)

    raise TargetUnreachable(f"GT PaLOSi not within [{lo}, {hi}] after {cfg.max_attempts} attempts")


def _band_entropy(cs: CrossSpectra, bands: BandSet) -> Tuple[Dict[str, float], Dict[str, List[int]]]:
    networks = band_networks(cs, bands)
    entropy = {name: shannon_entropy(net) for name, net in networks.items()}
    histograms = {name: weight_histogram(net).counts.tolist() for name, net in networks.items()}
    return entropy, histograms


def run_dataset(
    index: int,
    seed: int,
    cfg: DegradationConfig,
    leadfield: Leadfield,
    operator: InverseOperator,
    spectral: SpectralConfig,
    thresholds: QcThresholds,
    bands: BandSet,
) -> DatasetOutcome:
    rng = np.random.default_rng(seed)
    labels = list(leadfield.source_labels)
    gt, weight, gt_value, attempts = ground_truth_sources(cfg, rng, spectral, thresholds)

    ce = Recording(
        data=leadfield.matrix @ gt,
        fs=cfg.fs,
        channels=list(leadfield.channels),
        provenance={"dataset": index, "seed": seed},
    )
    ce_cs = cross_spectra_from_recording(ce, spectral)
    ce_value = _palosi_of(ce_cs, None, thresholds)
    n_sensors = ce.n_channels

    model = fastica(ce, seed=int(rng.integers(2**31 - 1)), strict=False)
    sweep: List[SweepPoint] = []
    sweep_cs: List[CrossSpectra] = []
    for k_removed in range(model.n_components):
        n_kept = model.n_components - k_removed
        if k_removed == 0:
            cs = ce_cs
        else:
            cs = cross_spectra_from_recording(remove_components(model, n_kept, base=ce), spectral)
        scalp_value = ce_value if k_removed == 0 else _palosi_of(cs, None, thresholds)
        source_value = _palosi_of(source_cross_spectra(operator, cs), n_sensors, thresholds)
        sweep.append(
            SweepPoint(
                dataset=index,
                k_removed=k_removed,
                n_kept=n_kept,
                scalp_palosi=scalp_value,
                source_palosi=source_value,
            )
        )
        sweep_cs.append(cs)

    epe = next((p for p in sweep if p.scalp_palosi > cfg.epe_threshold), sweep[-1])
    epe_cs = sweep_cs[epe.k_removed]
    sce_cs = source_cross_spectra(operator, ce_cs)
    sepe_cs = source_cross_spectra(operator, epe_cs)
    gt_cs = cross_spectra_from_recording(_source_recording(gt, cfg.fs, labels), spectral)

    at = cfg.similarity_hz
    nets = {
        name: network_at(coherence(cs), at)
        for name, cs in {"ce": ce_cs, "epe": epe_cs, "gt": gt_cs, "sce": sce_cs, "sepe": sepe_cs}.items()
    }
    similarity = {
        "ce_epe": network_similarity(nets["ce"], nets["epe"]),
        "sce_sepe": network_similarity(nets["sce"], nets["sepe"]),
        "gt_sce": network_similarity(nets["gt"], nets["sce"]),
        "gt_sepe": network_similarity(nets["gt"], nets["sepe"]),
    }
    se_ce, _ = _band_entropy(ce_cs, bands)
    se_epe, epe_histograms = _band_entropy(epe_cs, bands)

    removed = [p.k_removed for p in sweep]
    scalp = [p.scalp_palosi for p in sweep]
    rho = stats.spearmanr(removed, scalp).statistic if len(sweep) > 2 else 1.0

    outcome = DatasetOutcome(
        dataset=index,
        seed=seed,
        attempts=attempts,
        mixing_weight=weight,
        gt_palosi=gt_value,
        ce_palosi=ce_value,
        sce_palosi=sweep[0].source_palosi,
        epe_k_removed=epe.k_removed,
        epe_palosi=epe.scalp_palosi,
        sepe_palosi=epe.source_palosi,
        spearman=float(np.nan_to_num(rho, nan=0.0)),
        source_below_scalp=all(p.source_palosi < p.scalp_palosi for p in sweep),
        se_ce=se_ce,
        se_epe=se_epe,
        similarity=similarity,
        epe_histograms=epe_histograms,
        sweep=sweep,
    )
    logger.info(
        "Dataset %d: GT %.3f CE %.3f SCE %.3f EPE(k=%d) %.3f SEPE %.3f",
        index, gt_value, ce_value, outcome.sce_palosi, epe.k_removed, epe.scalp_palosi, epe.source_palosi,
    )
    return outcome


def dataset_seeds(cfg: DegradationConfig) -> List[int]:
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_datasets)
    return [int(child.generate_state(1)[0]) for child in children]


def run_suite(
    cfg: DegradationConfig,
    head: Optional[HeadModel] = None,
    spectral: Optional[SpectralConfig] = None,
    thresholds: Optional[QcThresholds] = None,
    bands: Optional[BandSet] = None,
) -> Tuple[List[DatasetOutcome], SuiteSummary]:
    head = head or default_head()
    spectral = spectral or SpectralConfig.from_settings()
    thresholds = thresholds or QcThresholds.from_settings()
    bands = bands or BandSet()

    grid = hemisphere_grid(head, cfg.n_sources)
    leadfield = spherical_leadfield(head, grid, labels=grid_labels(cfg.n_sources))
    operator = sloreta_operator(leadfield)
    seeds = dataset_seeds(cfg)

    logger.info(
        "Degradation suite: %d datasets, %d sources, %d sensors",
        cfg.n_datasets, cfg.n_sources, len(head.electrode_labels),
    )
    with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
        futures = [
            pool.submit(run_dataset, i, s, cfg, leadfield, operator, spectral, thresholds, bands)
            for i, s in enumerate(seeds)
        ]
        outcomes = [f.result() for f in futures]

    return outcomes, summarize(outcomes, cfg, bands)


def _fraction(flags) -> float:
    flags = list(flags)
    return float(np.mean(flags)) if flags else 0.0


def summarize(outcomes: List[DatasetOutcome], cfg: DegradationConfig, bands: Optional[BandSet] = None) -> SuiteSummary:
    bands = bands or BandSet()
    median = {
        name: float(np.median([getattr(o, f"{name}_palosi") for o in outcomes]))
        for name in ("gt", "ce", "sce", "epe", "sepe")
    }
    ordering = {
        "gt_below_ce": _fraction(o.gt_palosi < o.ce_palosi for o in outcomes),
        "sce_below_ce": _fraction(o.sce_palosi < o.ce_palosi for o in outcomes),
        "sepe_below_epe": _fraction(o.sepe_palosi < o.epe_palosi for o in outcomes),
        "epe_above_ce": _fraction(o.epe_palosi > o.ce_palosi for o in outcomes),
    }

    sign_test = {}
    modal = {}
    in_range = 0
    for name in bands.names:
        smaller = sum(o.se_epe[name] < o.se_ce[name] for o in outcomes)
        ties = sum(o.se_epe[name] == o.se_ce[name] for o in outcomes)
        trials = len(outcomes) - ties
        p_value = stats.binomtest(smaller, trials, 0.5, alternative="greater").pvalue if trials else 1.0
        sign_test[name] = {"smaller": float(smaller), "trials": float(trials), "p_value": float(p_value)}

        pooled = np.sum([o.epe_histograms[name] for o in outcomes], axis=0)
        top = int(np.argmax(pooled))
        modal[name] = [float(HISTOGRAM_EDGES[top]), float(HISTOGRAM_EDGES[top + 1])]
        # bins 14 and 15 together cover [0.7, 0.8)
        in_range += int(top in (14, 15))

    return SuiteSummary(
        n_datasets=len(outcomes),
        config=cfg,
        median_spearman=float(np.median([o.spearman for o in outcomes])),
        fraction_source_below_scalp=_fraction(o.source_below_scalp for o in outcomes),
        median_palosi=median,
        ordering=ordering,
        se_sign_test=sign_test,
        epe_modal_bin=modal,
        modal_bin_in_0_7_0_8=in_range,
        median_similarity={
            key: float(np.median([o.similarity[key] for o in outcomes])) for key in outcomes[0].similarity
        },
    )


def write_suite(outcomes: List[DatasetOutcome], summary: SuiteSummary, out_dir: Path) -> Dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "sweep": out_dir / "sweep.csv",
        "datasets": out_dir / "datasets.csv",
        "summary": out_dir / "summary.json",
    }

    sweep = pd.DataFrame([p.model_dump() for o in outcomes for p in o.sweep])
    sweep.to_csv(paths["sweep"], index=False, float_format="%.10g")

    rows = []
    for o in outcomes:
        row = o.model_dump(exclude={"sweep", "se_ce", "se_epe", "similarity", "epe_histograms"})
        row.update({f"se_ce_{k}": v for k, v in o.se_ce.items()})
        row.update({f"se_epe_{k}": v for k, v in o.se_epe.items()})
        row.update({f"similarity_{k}": v for k, v in o.similarity.items()})
        rows.append(row)
    pd.DataFrame(rows).to_csv(paths["datasets"], index=False, float_format="%.10g")

    paths["summary"].write_text(json.dumps(summary.model_dump(mode="json"), sort_keys=True, indent=2))
    logger.info("Suite results written to %s", out_dir)
    return paths
