"""Standardised minimum-norm (sLORETA) inverse and ROI reduction."""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg
from sklearn.decomposition import PCA

from app.config import get_settings
from app.errors import EmptyRoi, InvalidConfig, ShapeMismatch, SingularGram
from app.models import CrossSpectra, InverseOperator, Leadfield, Recording, RoiTimeSeries

logger = logging.getLogger(__name__)


def default_alpha(leadfield: Leadfield, scale: Optional[float] = None) -> float:
    scale = get_settings().sloreta_alpha_scale if scale is None else scale
    gram = leadfield.matrix @ leadfield.matrix.T
    return float(scale * np.trace(gram) / gram.shape[0])


def sloreta_operator(leadfield: Leadfield, alpha: Optional[float] = None) -> InverseOperator:
    lf = leadfield.matrix
    n_channels = lf.shape[0]
    alpha = default_alpha(leadfield) if alpha is None else float(alpha)
    if not alpha > 0:
        raise InvalidConfig(f"regularisation must be positive, got {alpha}")

    centring = np.eye(n_channels) - np.full((n_channels, n_channels), 1.0 / n_channels)
    gram = lf @ lf.T + alpha * centring
    if not np.all(np.isfinite(gram)) or not np.any(gram):
        raise SingularGram("leadfield Gram matrix is zero or non-finite")
    # the average-reference direction is a null vector, hence the pseudo-inverse
    minimum_norm = lf.T @ linalg.pinvh(gram)

    resolution = np.einsum("de,ed->d", minimum_norm, lf)
    if np.any(resolution <= 0):
        raise SingularGram(f"{int(np.sum(resolution <= 0))} source(s) have a non-positive resolution diagonal")
    kernel = minimum_norm / np.sqrt(resolution)[:, None]

    logger.debug("sLORETA operator %dx%d, alpha %.4g", *kernel.shape, alpha)
    return InverseOperator(
        kernel=kernel,
        minimum_norm=minimum_norm,
        resolution_diagonal=resolution,
        alpha=alpha,
        channels=list(leadfield.channels),
        source_labels=list(leadfield.source_labels),
    )


def apply_inverse(op: InverseOperator, rec: Recording, standardized: bool = True) -> np.ndarray:
    """Source estimates, sources x samples."""
    if rec.n_channels != len(op.channels):
        raise ShapeMismatch(f"operator expects {len(op.channels)} channels, recording has {rec.n_channels}")
    if list(rec.channels) != list(op.channels):
        raise ShapeMismatch("recording channel order differs from the operator's")
    matrix = op.kernel if standardized else op.minimum_norm
    return matrix @ rec.data


def source_cross_spectra(op: InverseOperator, cs: CrossSpectra, standardized: bool = True) -> CrossSpectra:
    """Cross-spectra of the source estimates, T S T^T, without going back to the time domain."""
    if list(cs.channels) != list(op.channels):
        raise ShapeMismatch("cross-spectra channel order differs from the operator's")
    matrix = op.kernel if standardized else op.minimum_norm
    projected = matrix @ cs.matrices @ matrix.T
    return CrossSpectra(
        matrices=projected,
        freqs=cs.freqs,
        n_segments=cs.n_segments,
        channels=list(op.source_labels),
    )


def roi_reduce(
    sources: np.ndarray,
    roi_assignment: Sequence[str],
    rois: Optional[List[str]] = None,
) -> RoiTimeSeries:
    """First principal component time course per ROI.

    Weights are the unit PC1 loadings divided by sqrt(member count), so an ROI of
    identical members returns the common signal with its variance intact.
    """
    sources = np.asarray(sources, dtype=float)
    if sources.ndim != 2 or len(roi_assignment) != sources.shape[0]:
        raise ShapeMismatch(f"{len(roi_assignment)} ROI assignments for sources of shape {sources.shape}")
    rois = rois or list(dict.fromkeys(roi_assignment))
    assignment = np.asarray(roi_assignment, dtype=object)

    series, variance, ratio = [], [], []
    for roi in rois:
        members = sources[assignment == roi]
        if members.shape[0] == 0:
            raise EmptyRoi(roi)
        pca = PCA(n_components=1, svd_solver="full").fit(members.T)
        weights = pca.components_[0] / np.sqrt(members.shape[0])
        course = weights @ members
        roi_mean = members.mean(axis=0)
        if np.dot(course - course.mean(), roi_mean - roi_mean.mean()) < 0:
            course = -course
        series.append(course)
        variance.append(pca.explained_variance_[0])
        ratio.append(pca.explained_variance_ratio_[0])

    return RoiTimeSeries(
        data=np.vstack(series),
        labels=list(rois),
        explained_variance=np.array(variance),
        explained_variance_ratio=np.array(ratio),
    )
