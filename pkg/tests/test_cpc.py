import numpy as np
import pytest

from app.errors import DegenerateInput, InvalidConfig, NoConvergence
from app.services.cpc import stepwise_cpc

from tests.conftest import make_cross_spectra, random_psd, random_unitary


def test_commuting_diagonal_matrices():
    cs = make_cross_spectra([np.diag([4.0, 1.0]), np.diag([2.0, 1.0])])
    result = stepwise_cpc(cs)
    np.testing.assert_allclose(np.abs(result.gamma), np.eye(2), atol=1e-10)
    np.testing.assert_allclose(result.diagonals, [[4.0, 1.0], [2.0, 1.0]], atol=1e-10)


def test_rank_one_common_structure(rng):
    v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    v /= np.linalg.norm(v)
    a = rng.uniform(0.5, 2.0, 7)
    result = stepwise_cpc(make_cross_spectra([ai * np.outer(v, v.conj()) for ai in a]))
    assert abs(np.vdot(result.gamma[:, 0], v)) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(result.diagonals[:, 0], a, rtol=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_recovers_shared_unitary_basis(seed):
    rng = np.random.default_rng(seed)
    n, n_freqs = 6, 10
    u = random_unitary(rng, n)
    lam = rng.uniform(0.1, 5.0, (n_freqs, n))
    matrices = np.stack([u @ np.diag(row) @ u.conj().T for row in lam])
    result = stepwise_cpc(make_cross_spectra(matrices))

    overlaps = np.abs(u.conj().T @ result.gamma)
    # each true column must be matched by one recovered column
    angles = np.arccos(np.clip(overlaps.max(axis=1), 0.0, 1.0))
    assert angles.max() < 1e-6

    g = result.gamma
    for f in range(n_freqs):
        rebuilt = g @ np.diag(result.diagonals[f]) @ g.conj().T
        assert np.linalg.norm(rebuilt - matrices[f]) / np.linalg.norm(matrices[f]) < 1e-6


def test_gamma_is_orthonormal_and_sorted(rng):
    matrices = np.stack([random_psd(rng, 5) for _ in range(6)])
    result = stepwise_cpc(make_cross_spectra(matrices))
    np.testing.assert_allclose(result.gamma.conj().T @ result.gamma, np.eye(5), atol=1e-10)
    totals = result.diagonals.sum(axis=0)
    assert np.all(np.diff(totals) <= 1e-12)
    assert len(result.iterations) == 5


def test_truncated_component_count(rng):
    matrices = np.stack([random_psd(rng, 5) for _ in range(4)])
    result = stepwise_cpc(make_cross_spectra(matrices), n_components=2)
    assert result.gamma.shape == (5, 2)
    assert result.diagonals.shape == (4, 2)


def test_exhausted_spectrum_completes_basis(rng):
    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    result = stepwise_cpc(make_cross_spectra([np.outer(v, v)] * 3))
    assert result.iterations[1:] == [0, 0, 0]
    np.testing.assert_allclose(result.gamma.conj().T @ result.gamma, np.eye(4), atol=1e-10)


def test_all_zero_is_degenerate():
    with pytest.raises(DegenerateInput):
        stepwise_cpc(make_cross_spectra(np.zeros((3, 4, 4))))


@pytest.mark.parametrize("k", [0, 5])
def test_component_count_out_of_range(k):
    with pytest.raises(InvalidConfig):
        stepwise_cpc(make_cross_spectra([np.eye(4)]), n_components=k)


def test_iteration_cap(rng):
    matrices = np.stack([random_psd(rng, 6) for _ in range(8)])
    with pytest.raises(NoConvergence) as info:
        stepwise_cpc(make_cross_spectra(matrices), max_iter=1)
    assert info.value.component == 0


@pytest.mark.parametrize("seed", range(10))
def test_converges_on_scalp_sized_random_spectra(seed):
    rng = np.random.default_rng(seed)
    # 19 channels over the default 1-30 Hz grid at 0.5 Hz resolution
    scales = rng.uniform(0.1, 10.0, 59)
    matrices = np.stack([s * random_psd(rng, 19) for s in scales])
    cs = make_cross_spectra(matrices)
    result = stepwise_cpc(cs)
    np.testing.assert_allclose(result.gamma.conj().T @ result.gamma, np.eye(19), atol=1e-8)
    assert max(result.iterations) < 500

    q = stepwise_cpc(cs, n_components=1).gamma[:, 0]
    forms = np.real(np.einsum("i,fij,j->f", q.conj(), matrices, q))
    direction = np.einsum("fij,j->i", matrices / forms[:, None, None], q)
    tangential = direction - np.vdot(q, direction) * q
    assert np.linalg.norm(tangential) / len(scales) < 1e-4


def test_rank_deficient_spectra_complete_with_powerless_directions(rng):
    span = random_unitary(rng, 8)[:, :3]
    matrices = np.stack([span @ random_psd(rng, 3) @ span.conj().T for _ in range(12)])
    result = stepwise_cpc(make_cross_spectra(matrices))
    np.testing.assert_allclose(result.gamma.conj().T @ result.gamma, np.eye(8), atol=1e-8)
    power = result.diagonals.sum(axis=0)
    assert np.all(power[:3] > 1e-6)
    np.testing.assert_allclose(power[3:], 0.0, atol=1e-10)
    assert sorted(result.iterations)[:5] == [0] * 5
