"""Dipole scenarios, coherence-controlled source signals and noiseless forward projection."""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from app.errors import InvalidConfig, ShapeMismatch, TargetUnreachable
from app.models import DipoleScenario, HeadModel, Leadfield, Recording, ScenarioManifest, SpectralConfig
from app.services.head_model import default_head, spherical_leadfield
from app.services.spectra import count_segments, cross_spectra, segment_and_window

logger = logging.getLogger(__name__)

MOMENT_NAM = 100.0
MIN_TARGET_SECONDS = 60.0
COHERENCE_SLACK = 0.05
RING_CENTRE_MM = np.array([0.0, -70.0, 40.0])
# angular radii of the C/D rings around the centre dipole
RING_ANGLES_DEG = (5.0, 10.0, 15.0)
RING_SIZE = 6
DISPERSED_DIRECTIONS = np.array([[-0.5, 0.7, 0.5], [0.8, -0.1, 0.4], [0.0, -0.8, 0.45]])
DISPERSED_RADIUS_MM = 70.0
D_RING_INTENSITIES = (1.0, 0.98, 0.05, 0.01)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _concentric_rings() -> Tuple[np.ndarray, list]:
    radius = float(np.linalg.norm(RING_CENTRE_MM))
    axis = _unit(RING_CENTRE_MM)
    u = _unit(np.cross(axis, [1.0, 0.0, 0.0]))
    v = np.cross(axis, u)
    directions = [axis]
    rings = [0]
    for ring, angle in enumerate(np.deg2rad(RING_ANGLES_DEG), start=1):
        for phi in np.arange(RING_SIZE) * 2 * np.pi / RING_SIZE:
            directions.append(np.cos(angle) * axis + np.sin(angle) * (np.cos(phi) * u + np.sin(phi) * v))
            rings.append(ring)
    directions = _unit(np.array(directions))
    return radius * directions, rings


def scenario_preset(tag: str) -> DipoleScenario:
    tag = tag.upper()
    if tag == "A":
        return DipoleScenario(
            positions_mm=RING_CENTRE_MM[None, :],
            orientations=_unit(RING_CENTRE_MM)[None, :],
            intensities=[1.0],
            coherence_range=(1.0, 1.0),
            tag="A",
        )
    if tag == "B":
        directions = _unit(DISPERSED_DIRECTIONS)
        return DipoleScenario(
            positions_mm=DISPERSED_RADIUS_MM * directions,
            orientations=directions,
            intensities=np.ones(len(directions)),
            coherence_range=(0.0, 0.1),
            tag="B",
        )
    if tag in ("C", "D"):
        positions, rings = _concentric_rings()
        if tag == "C":
            intensities = np.ones(len(rings))
            coherence_range = (0.8, 0.9)
        else:
            intensities = np.array([D_RING_INTENSITIES[r] for r in rings])
            coherence_range = (0.0, 0.1)
        return DipoleScenario(
            positions_mm=positions,
            orientations=_unit(positions),
            intensities=intensities,
            coherence_range=coherence_range,
            tag=tag,
            rings=rings,
        )
    raise InvalidConfig(f"Unknown scenario {tag!r}; expected one of A, B, C, D")


def _coherence_config(fs: float) -> SpectralConfig:
    base = SpectralConfig.from_settings()
    return base.model_copy(update={"f_max": min(base.f_max, fs / 2)})


def pairwise_coherence(sources: np.ndarray, fs: float) -> np.ndarray:
    """Band-averaged magnitude coherence between every pair of rows."""
    labels = [f"s{i}" for i in range(sources.shape[0])]
    rec = Recording(data=sources, fs=fs, channels=labels, units="nAm")
    cs = cross_spectra(segment_and_window(rec, _coherence_config(fs)))
    power = np.real(np.diagonal(cs.matrices, axis1=1, axis2=2))
    coh = np.abs(cs.matrices) / np.sqrt(power[:, :, None] * power[:, None, :])
    return coh.mean(axis=0)


def _mean_off_diagonal(matrix: np.ndarray) -> float:
    rows, cols = np.triu_indices(matrix.shape[0], k=1)
    return float(matrix[rows, cols].mean())


def _mix(common: np.ndarray, private: np.ndarray, weight: float, intensities: np.ndarray) -> np.ndarray:
    signals = np.sqrt(weight) * common[None, :] + np.sqrt(1.0 - weight) * private
    signals = signals - signals.mean(axis=1, keepdims=True)
    return MOMENT_NAM * intensities[:, None] * signals


def generate_sources(
    scenario: DipoleScenario,
    duration_s: float,
    fs: float,
    seed: int,
) -> Tuple[np.ndarray, float]:
    """Source moments in nA*m (dipoles x samples) and the common-driver weight used.

    Every source is a blend of one shared white driver and its own white noise;
    the blend weight is tuned so the measured pair-averaged coherence sits at the
    upper end of the scenario's target range.
    """
    n_samples = int(round(duration_s * fs))
    n_dipoles = scenario.n_dipoles
    lo, hi = scenario.coherence_range
    rng = np.random.default_rng(seed)
    common = rng.standard_normal(n_samples)
    private = rng.standard_normal((n_dipoles, n_samples))
    intensities = scenario.intensities

    if n_dipoles == 1 or hi >= 1.0:
        return _mix(common, private, 1.0, intensities), 1.0
    if duration_s < MIN_TARGET_SECONDS:
        raise InvalidConfig(f"coherence targeting needs at least {MIN_TARGET_SECONDS:g} s, got {duration_s:g} s")

    active = intensities > 0
    if active.sum() < 2:
        return _mix(common, private, 0.0, intensities), 0.0

    def excess(weight: float) -> float:
        signals = _mix(common, private[active], weight, intensities[active])
        return _mean_off_diagonal(pairwise_coherence(signals, fs)) - hi

    if excess(0.0) >= 0:
        weight = 0.0
    else:
        weight = float(optimize.brentq(excess, 0.0, 1.0, xtol=1e-6))

    sources = _mix(common, private, weight, intensities)
    measured = pairwise_coherence(sources[active], fs)
    rows, cols = np.triu_indices(int(active.sum()), k=1)
    pairs = measured[rows, cols]
    # independent segments leave a positive magnitude-coherence bias of about 1/sqrt(N_s)
    bias = 1.0 / np.sqrt(max(count_segments(n_samples, fs, _coherence_config(fs)), 1))
    if pairs.min() < lo - COHERENCE_SLACK or pairs.max() > hi + COHERENCE_SLACK + bias:
        raise TargetUnreachable(
            f"pairwise coherence spans [{pairs.min():.3f}, {pairs.max():.3f}], target [{lo:g}, {hi:g}]"
        )
    logger.info("Scenario %s: common-driver weight %.4f, mean coherence %.3f", scenario.tag, weight, pairs.mean())
    return sources, weight


def forward(
    leadfield: Leadfield,
    sources: np.ndarray,
    fs: float,
    provenance: Optional[dict] = None,
) -> Recording:
    sources = np.asarray(sources, dtype=float)
    if sources.ndim != 2 or sources.shape[0] != leadfield.matrix.shape[1]:
        raise ShapeMismatch(
            f"leadfield has {leadfield.matrix.shape[1]} sources, signals have shape {sources.shape}"
        )
    return Recording(
        data=leadfield.matrix @ sources,
        fs=fs,
        channels=list(leadfield.channels),
        reference="common-average",
        units="uV",
        provenance=provenance or {},
    )


def head_model_note(head: HeadModel) -> dict:
    return {
        "model": "concentric spheres",
        "radii_mm": list(head.radii_mm),
        "conductivities_s_per_m": list(head.conductivities),
        "electrodes": list(head.electrode_labels),
    }


def simulate_scenario(
    tag: str,
    seed: int,
    duration_s: float = 60.0,
    fs: float = 100.0,
    head: Optional[HeadModel] = None,
) -> Tuple[Recording, np.ndarray, ScenarioManifest]:
    """Scalp recording, source signals and manifest for one preset."""
    head = head or default_head()
    scenario = scenario_preset(tag)
    leadfield = spherical_leadfield(head, scenario)
    sources, weight = generate_sources(scenario, duration_s, fs, seed)

    if scenario.n_dipoles > 1:
        coh = pairwise_coherence(sources, fs)
        rows, cols = np.triu_indices(scenario.n_dipoles, k=1)
        pairs = coh[rows, cols]
    else:
        pairs = np.ones(1)

    manifest = ScenarioManifest(
        tag=scenario.tag,
        seed=seed,
        duration_s=duration_s,
        fs=fs,
        positions_mm=scenario.positions_mm.tolist(),
        orientations=scenario.orientations.tolist(),
        intensities=scenario.intensities.tolist(),
        coherence_range=scenario.coherence_range,
        mixing_weight=weight,
        measured_coherence=float(pairs.mean()),
        pairwise_coherence_min=float(pairs.min()),
        pairwise_coherence_max=float(pairs.max()),
        head_model=head_model_note(head),
    )
    provenance = {"scenario": scenario.tag, "seed": seed, "head_model": manifest.head_model}
    return forward(leadfield, sources, fs, provenance), sources, manifest
