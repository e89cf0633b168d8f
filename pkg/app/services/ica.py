"""FastICA decomposition ranked by explained variance, and back-projection of the top components."""

import logging
import warnings
from typing import Optional

import numpy as np
from sklearn.decomposition import FastICA
from sklearn.exceptions import ConvergenceWarning

from app.config import get_settings
from app.errors import DegenerateInput, InvalidConfig, NoConvergence
from app.models import IcaModel, Recording
from app.services.recording import with_data

logger = logging.getLogger(__name__)


def data_rank(data: np.ndarray) -> int:
    """Numerical rank of the channel-centred data, channels x samples."""
    centred = data - data.mean(axis=1, keepdims=True)
    return int(np.linalg.matrix_rank(centred))


def fixed_point_change(sources: np.ndarray) -> float:
    """Size of the next symmetric log-cosh FastICA update, samples x components.

    This is the quantity FastICA stops on, the largest deviation of |diag(W_next W^T)|
    from 1, written in source coordinates so no whitening matrix is needed.
    """
    s = sources / sources.std(axis=0)
    g = np.tanh(s)
    step = g.T @ s / s.shape[0] - np.diag((1.0 - g**2).mean(axis=0))
    vals, vecs = np.linalg.eigh(step @ step.T)
    inv_sqrt = (vecs / np.sqrt(np.maximum(vals, np.finfo(float).tiny))) @ vecs.T
    return float(np.max(np.abs(np.abs(np.diag(inv_sqrt @ step)) - 1.0)))


def fastica(
    rec: Recording,
    n_components: Optional[int] = None,
    seed: int = 0,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    strict: bool = True,
) -> IcaModel:
    """Symmetric FastICA with a log-cosh contrast on PCA-whitened data.

    ``n_components`` defaults to the numerical rank, so average-referenced data
    (rank N_e - 1) is decomposed without whitening a null direction. With
    ``strict=False`` an unconverged unmixing is logged and kept instead of raising.
    """
    settings = get_settings()
    tol = settings.ica_tol if tol is None else tol
    max_iter = settings.ica_max_iter if max_iter is None else max_iter

    rank = data_rank(rec.data)
    if rank == 0:
        raise DegenerateInput("recording has zero variance")
    n_components = rank if n_components is None else int(n_components)
    if not 1 <= n_components <= rank:
        raise InvalidConfig(f"n_components must be in [1, {rank}] (data rank), got {n_components}")

    samples = rec.data.T
    ica = FastICA(
        n_components=n_components,
        algorithm="parallel",
        fun="logcosh",
        whiten="unit-variance",
        tol=tol,
        max_iter=max_iter,
        random_state=seed,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        sources = ica.fit_transform(samples)
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        change = fixed_point_change(sources)
        if strict:
            raise NoConvergence(change, int(ica.n_iter_))
        logger.warning("FastICA stopped after %d iterations with change %.3e; keeping the unmixing", ica.n_iter_, change)

    mixing = ica.mixing_
    total = float(samples.var(axis=0).sum())
    share = (mixing**2).sum(axis=0) * sources.var(axis=0) / total
    order = np.argsort(-share, kind="stable")
    logger.info("FastICA: %d components in %d iterations, top share %.3f", n_components, ica.n_iter_, share[order[0]])

    return IcaModel(
        mixing=mixing[:, order],
        unmixing=ica.components_[order],
        sources=sources[:, order].T,
        explained_variance=share[order],
        mean=ica.mean_,
        fs=rec.fs,
        channels=list(rec.channels),
        reference=rec.reference,
    )


def remove_components(model: IcaModel, keep_top_k: int, base: Optional[Recording] = None) -> Recording:
    """Back-project only the ``keep_top_k`` components with the highest explained variance."""
    if not 1 <= keep_top_k <= model.n_components:
        raise InvalidConfig(f"keep_top_k must be in [1, {model.n_components}], got {keep_top_k}")
    data = model.mixing[:, :keep_top_k] @ model.sources[:keep_top_k] + model.mean[:, None]
    if base is not None:
        return with_data(base, data)
    return Recording(data=data, fs=model.fs, channels=list(model.channels), reference=model.reference)
