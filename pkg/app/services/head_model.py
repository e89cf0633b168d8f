"""Concentric-sphere head model, electrode layout and analytic dipole leadfields.

Potentials on the outer shell come from the multi-shell Legendre series for a current
dipole in nested spheres of constant conductivity. Coefficients of the series are the
product of one 2x2 transfer matrix per interface.
"""

import logging
from typing import List, Optional

import numpy as np
from numpy.polynomial import legendre

from app.errors import DipoleOutsideBrain
from app.models import DipoleScenario, HeadModel, Leadfield

logger = logging.getLogger(__name__)

MAX_TERMS = 1000
SERIES_TOL = 1e-15
# V per A*m -> uV per nA*m
UV_PER_NAM = 1e6 * 1e-9

# (polar angle from vertex, azimuth from nasion towards the right ear), degrees
ELECTRODES_10_20 = {
    "Fp1": (72.0, -18.0),
    "Fp2": (72.0, 18.0),
    "F7": (72.0, -54.0),
    "F3": (51.0, -39.5),
    "Fz": (36.0, 0.0),
    "F4": (51.0, 39.5),
    "F8": (72.0, 54.0),
    "T3": (72.0, -90.0),
    "C3": (36.0, -90.0),
    "Cz": (0.0, 0.0),
    "C4": (36.0, 90.0),
    "T4": (72.0, 90.0),
    "T5": (72.0, -126.0),
    "P3": (51.0, -140.5),
    "Pz": (36.0, 180.0),
    "P4": (51.0, 140.5),
    "T6": (72.0, 126.0),
    "O1": (72.0, -162.0),
    "O2": (72.0, 162.0),
}


def electrode_unit_vectors(angles: dict) -> np.ndarray:
    theta = np.deg2rad([a[0] for a in angles.values()])
    azimuth = np.deg2rad([a[1] for a in angles.values()])
    # x towards the right ear, y towards the nasion, z towards the vertex
    return np.column_stack([np.sin(theta) * np.sin(azimuth), np.sin(theta) * np.cos(azimuth), np.cos(theta)])


def default_head() -> HeadModel:
    return HeadModel(
        electrode_positions=electrode_unit_vectors(ELECTRODES_10_20),
        electrode_labels=list(ELECTRODES_10_20),
    )


def series_weights(head: HeadModel, n_terms: int) -> np.ndarray:
    """f_n for n = 1..n_terms; all ones for a homogeneous sphere."""
    radii = np.asarray(head.radii_mm, dtype=float)
    sigma = np.asarray(head.conductivities, dtype=float)
    outer = radii[-1]
    weights = np.empty(n_terms)
    for n in range(1, n_terms + 1):
        m = np.eye(2)
        for k in range(len(radii) - 1):
            ratio = sigma[k] / sigma[k + 1]
            scale = (radii[k] / outer) ** (2 * n + 1)
            step = np.array(
                [
                    [n + (n + 1) * ratio, (n + 1) * (ratio - 1) / scale],
                    [n * (ratio - 1) * scale, (n + 1) + n * ratio],
                ]
            ) / (2 * n + 1)
            m = m @ step
        weights[n - 1] = n / (n * m[1, 1] + (n + 1) * m[1, 0])
    return weights


def _terms_needed(eccentricity: float) -> int:
    if eccentricity <= 0:
        return 1
    n = np.arange(1, MAX_TERMS + 1)
    small = np.flatnonzero(n**2 * eccentricity ** (n - 1) < SERIES_TOL)
    return int(small[0]) + 1 if small.size else MAX_TERMS


def dipole_potentials(
    head: HeadModel,
    position_mm: np.ndarray,
    moment: np.ndarray,
    f_n: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Outer-shell potentials in uV for a dipole of the given moment in nA*m (reference at infinity)."""
    position_mm = np.asarray(position_mm, dtype=float)
    moment = np.asarray(moment, dtype=float)
    outer_m = head.scalp_radius_mm * 1e-3
    depth = float(np.linalg.norm(position_mm))
    eccentricity = depth / head.scalp_radius_mm
    r_q = position_mm / depth if depth > 0 else np.array([0.0, 0.0, 1.0])

    n_terms = _terms_needed(eccentricity)
    if f_n is None or f_n.size < n_terms:
        f_n = series_weights(head, n_terms)
    n = np.arange(1, n_terms + 1, dtype=float)
    base = (2 * n + 1) / n * eccentricity ** (n - 1) * f_n[:n_terms]

    electrodes = head.electrode_positions
    cos_gamma = np.clip(electrodes @ r_q, -1.0, 1.0)
    q_radial = float(moment @ r_q)
    q_electrode = electrodes @ moment

    radial_coefs = np.concatenate([[0.0], base * n])
    tangential_coefs = legendre.legder(np.concatenate([[0.0], base]))
    radial = legendre.legval(cos_gamma, radial_coefs)
    tangential = legendre.legval(cos_gamma, tangential_coefs)

    conductivity = head.conductivities[-1]
    prefactor = UV_PER_NAM / (4 * np.pi * conductivity * outer_m**2)
    return prefactor * (q_radial * radial + (q_electrode - q_radial * cos_gamma) * tangential)


def spherical_leadfield(head: HeadModel, scenario: DipoleScenario, labels: Optional[List[str]] = None) -> Leadfield:
    """Average-referenced leadfield, uV per nA*m, one column per fixed-orientation dipole."""
    depths = np.linalg.norm(scenario.positions_mm, axis=1)
    for index, depth in enumerate(depths):
        if depth >= head.brain_radius_mm:
            raise DipoleOutsideBrain(index, float(depth), head.brain_radius_mm)

    f_n = series_weights(head, max(_terms_needed(d / head.scalp_radius_mm) for d in depths))
    columns = [
        dipole_potentials(head, position, orientation, f_n)
        for position, orientation in zip(scenario.positions_mm, scenario.orientations)
    ]
    matrix = np.column_stack(columns)
    matrix = matrix - matrix.mean(axis=0, keepdims=True)

    labels = labels or [f"D{i + 1:03d}" for i in range(scenario.n_dipoles)]
    logger.debug("Leadfield %dx%d from %d-shell model", *matrix.shape, len(head.radii_mm))
    return Leadfield(matrix=matrix, channels=list(head.electrode_labels), source_labels=labels)


def hemisphere_grid(head: HeadModel, n_sources: int = 103, depth_fraction: float = 0.8) -> DipoleScenario:
    """Quasi-uniform radial dipoles on the upper half of a sphere inside the brain shell."""
    i = np.arange(n_sources)
    z = (i + 0.5) / n_sources
    azimuth = i * np.pi * (3.0 - np.sqrt(5.0))
    ring = np.sqrt(1.0 - z**2)
    directions = np.column_stack([ring * np.cos(azimuth), ring * np.sin(azimuth), z])
    return DipoleScenario(
        positions_mm=depth_fraction * head.brain_radius_mm * directions,
        orientations=directions,
        intensities=np.ones(n_sources),
    )


def grid_labels(n_sources: int) -> List[str]:
    return [f"S{i + 1:03d}" for i in range(n_sources)]
