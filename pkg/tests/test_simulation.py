import numpy as np
import pytest

from app.errors import InvalidConfig, ShapeMismatch
from app.models import DipoleScenario, Recording, SpectralConfig
from app.services.cpc import stepwise_cpc
from app.services.head_model import default_head, spherical_leadfield
from app.services.palosi import palosi, palosi_from_recording
from app.services.simulation import (
    forward,
    generate_sources,
    pairwise_coherence,
    scenario_preset,
    simulate_scenario,
)
from app.services.spectra import cross_spectra_from_recording

from tests.conftest import labels


def _source_palosi(sources, fs):
    rec = Recording(data=sources, fs=fs, channels=labels(sources.shape[0]), units="nAm")
    cs = cross_spectra_from_recording(rec, SpectralConfig())
    return palosi(cs, stepwise_cpc(cs)).global_index


def test_presets():
    head = default_head()
    a = scenario_preset("A")
    assert a.n_dipoles == 1
    assert spherical_leadfield(head, a).matrix.shape == (19, 1)

    c = scenario_preset("c")
    assert c.n_dipoles == 19
    assert c.coherence_range == (0.8, 0.9)

    d = scenario_preset("D")
    by_ring = {ring: float(i) for ring, i in zip(d.rings, d.intensities)}
    assert by_ring == {0: 1.0, 1: 0.98, 2: 0.05, 3: 0.01}
    assert scenario_preset("B").n_dipoles == 3


def test_unknown_preset():
    with pytest.raises(InvalidConfig):
        scenario_preset("E")


def test_forward_is_linear():
    head = default_head()
    lf = spherical_leadfield(head, scenario_preset("B"))
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((3, 400)), rng.standard_normal((3, 400))
    np.testing.assert_allclose(
        forward(lf, a + 2 * b, 100.0).data,
        forward(lf, a, 100.0).data + 2 * forward(lf, b, 100.0).data,
        atol=1e-12 * np.abs(lf.matrix).max() * 10,
    )
    assert not forward(lf, np.zeros((3, 400)), 100.0).data.any()
    with pytest.raises(ShapeMismatch):
        forward(lf, np.zeros((2, 400)), 100.0)


def test_fully_coherent_target_gives_identical_sources():
    directions = np.array([[0, 0, 1.0], [0, 0.6, 0.8], [0.6, 0, 0.8]])
    scenario = DipoleScenario(
        positions_mm=60 * directions,
        orientations=directions,
        intensities=[1.0, 2.0, 0.5],
        coherence_range=(1.0, 1.0),
    )
    sources, weight = generate_sources(scenario, 10.0, 100.0, seed=4)
    assert weight == 1.0
    np.testing.assert_allclose(sources[1], 2 * sources[0])
    np.testing.assert_allclose(sources[2], 0.5 * sources[0])


def test_generation_is_seeded():
    scenario = scenario_preset("B")
    a, wa = generate_sources(scenario, 60.0, 100.0, seed=11)
    b, wb = generate_sources(scenario, 60.0, 100.0, seed=11)
    assert wa == wb
    assert np.array_equal(a, b)
    c, _ = generate_sources(scenario, 60.0, 100.0, seed=12)
    assert not np.array_equal(a, c)


def test_low_coherence_target():
    scenario = scenario_preset("D").model_copy(update={"intensities": np.ones(19)})
    sources, _ = generate_sources(scenario, 300.0, 100.0, seed=5)
    coh = pairwise_coherence(sources, 100.0)
    off = ~np.eye(19, dtype=bool)
    assert coh[off].max() < 0.2


def test_ring_variance_ratios():
    scenario = scenario_preset("D")
    sources, _ = generate_sources(scenario, 120.0, 100.0, seed=6)
    variance = sources.var(axis=1)
    rings = np.array(scenario.rings)
    for ring, intensity in enumerate((1.0, 0.98, 0.05, 0.01)):
        ratio = variance[rings == ring].mean() / variance[0]
        assert ratio == pytest.approx(intensity**2, rel=0.05)


def test_targeting_needs_a_minute_of_data():
    with pytest.raises(InvalidConfig):
        generate_sources(scenario_preset("B"), 30.0, 100.0, seed=1)


@pytest.mark.parametrize("seed", range(10))
def test_single_dipole_is_fully_parallel(seed):
    rec, sources, manifest = simulate_scenario("A", seed)
    assert palosi_from_recording(rec).global_index == pytest.approx(1.0, abs=1e-6)
    assert manifest.mixing_weight == 1.0
    assert rec.provenance["scenario"] == "A"


def test_dispersed_dipoles_are_less_parallel():
    rec, _, manifest = simulate_scenario("B", seed=2)
    value = palosi_from_recording(rec).global_index
    single, _, _ = simulate_scenario("A", seed=2)
    assert 1 / 3 < value < palosi_from_recording(single).global_index
    assert value < 0.99
    assert manifest.pairwise_coherence_max < 0.3


def test_decaying_ring_topographies_overlap():
    # independent sources with equal spectra: scalp PaLOSi is the top eigenvalue share of L D L^T
    scenario = scenario_preset("D")
    lf = spherical_leadfield(default_head(), scenario).matrix
    covariance = lf @ np.diag(np.asarray(scenario.intensities) ** 2) @ lf.T
    eigenvalues = np.linalg.eigvalsh(covariance)
    assert eigenvalues[-1] / eigenvalues.sum() > 0.85


def test_manifest_records_scenario():
    rec, sources, manifest = simulate_scenario("C", seed=3)
    assert manifest.tag == "C"
    assert len(manifest.positions_mm) == sources.shape[0] == 19
    assert manifest.pairwise_coherence_min >= 0.75
    assert rec.channels == default_head().electrode_labels


@pytest.mark.slow
def test_coherent_cluster_is_parallel_on_scalp_and_source():
    scalp, source = [], []
    for seed in range(10):
        rec, sources, _ = simulate_scenario("C", seed)
        scalp.append(palosi_from_recording(rec).global_index)
        source.append(_source_palosi(sources, rec.fs))
    assert np.median(scalp) > 0.85
    assert np.median(source) > 0.85


@pytest.mark.slow
def test_decaying_rings_are_parallel_only_on_scalp():
    scalp, source = [], []
    for seed in range(10):
        rec, sources, _ = simulate_scenario("D", seed)
        scalp.append(palosi_from_recording(rec).global_index)
        source.append(_source_palosi(sources, rec.fs))
    assert np.median(scalp) > 0.85
    assert np.median(source) < 0.35
