"""Stepwise common principal components of a stack of Hermitian cross-spectra.

Columns are extracted one at a time. Column j maximises sum_w log(q^H S_w q) over
unit vectors orthogonal to the columns already accepted. Each iteration jumps to the top
eigenvector of the reweighted sum sum_w S_w / (q^H S_w q). When that jump lowers the
objective it falls back to the reweighted power direction with backtracking, so the
objective never decreases.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from app.config import get_settings
from app.errors import DegenerateInput, EigenFailure, InvalidConfig, NoConvergence
from app.models import CpcResult, CrossSpectra
from app.services.spectra import fix_phase

logger = logging.getLogger(__name__)

EXHAUSTED_TRACE = 1e-12
MIN_STEP = 1e-8
RANGE_RTOL = 1e-12


def _quadratic_forms(stack: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("i,fij,j->f", q.conj(), stack, q))


def _top_eigenvector(matrix: np.ndarray) -> np.ndarray:
    try:
        _, vectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"eigendecomposition of averaged spectrum failed: {exc}") from exc
    return vectors[:, -1].astype(np.complex128)


def _aligned(vec: np.ndarray, ref: np.ndarray) -> np.ndarray:
    overlap = np.vdot(vec, ref)
    if abs(overlap) > 0:
        vec = vec * (overlap / abs(overlap))
    return vec


def _ascend(stack: np.ndarray, tol: float, max_iter: int, component: int) -> Tuple[np.ndarray, int]:
    """Maximise sum_w log(q^H S_w q) over unit q for a reduced stack.

    Stops when the tangential gradient, relative to the number of frequencies, falls to
    ``tol``, or when a full step gains less than ``tol`` relative to the objective while
    that gradient is below ``sqrt(tol)``.
    """
    n_freqs, size, _ = stack.shape
    if size == 1:
        return np.ones(1, dtype=np.complex128), 0

    q = _top_eigenvector(stack.mean(axis=0))
    floor = EXHAUSTED_TRACE * max(float(np.real(np.trace(stack, axis1=1, axis2=2)).max()), np.finfo(float).tiny)

    def objective(vec: np.ndarray) -> float:
        return float(np.sum(np.log(np.maximum(_quadratic_forms(stack, vec), floor))))

    current = objective(q)
    gradient = np.inf
    for iteration in range(1, max_iter + 1):
        forms = np.maximum(_quadratic_forms(stack, q), floor)
        weighted = np.einsum("f,fij->ij", 1.0 / forms, stack)
        weighted = 0.5 * (weighted + weighted.conj().T)
        direction = weighted @ q
        gradient = float(np.linalg.norm(direction - np.vdot(q, direction) * q)) / n_freqs
        if gradient <= tol:
            return q, iteration

        # fixed point: q is the top eigenvector of its own reweighted sum
        trial = _aligned(_top_eigenvector(weighted), q)
        value = objective(trial)
        full_step = value >= current
        if not full_step:
            direction = _aligned(direction / np.linalg.norm(direction), q)
            step = 1.0
            trial = None
            while step > MIN_STEP:
                candidate = (1.0 - step) * q + step * direction
                candidate /= np.linalg.norm(candidate)
                value = objective(candidate)
                if value >= current:
                    trial = candidate
                    break
                step *= 0.5
            if trial is None:
                # no ascent left at working precision
                return q, iteration

        gain = value - current
        q, current = trial, value
        if full_step and gain <= tol * max(abs(current), 1.0) and gradient <= np.sqrt(tol):
            return q, iteration

    raise NoConvergence(gradient, max_iter, component)


def stepwise_cpc(
    cs: CrossSpectra,
    n_components: Optional[int] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> CpcResult:
    settings = get_settings()
    tol = settings.cpc_tol if tol is None else tol
    max_iter = settings.cpc_max_iter if max_iter is None else max_iter

    n_freqs, n_channels, _ = cs.matrices.shape
    k = n_channels if n_components is None else int(n_components)
    if not 1 <= k <= n_channels:
        raise InvalidConfig(f"component count must be in [1, {n_channels}], got {k}")

    total = float(cs.traces().sum())
    if not np.isfinite(total) or total <= 0:
        raise DegenerateInput("all cross-spectral matrices are zero")
    # normalising by the summed trace makes the iteration scale free
    stack = cs.matrices / total

    # every matrix lies in the range of the summed stack; directions outside it carry no power
    values, vectors = np.linalg.eigh(stack.sum(axis=0))
    in_range = values > RANGE_RTOL * values.max()
    rank = int(in_range.sum())
    if rank < n_channels:
        span = vectors[:, in_range][:, ::-1]
        work = np.conj(span.T) @ stack @ span
        logger.debug("Stepwise CPC restricted to a rank-%d range of %d channels", rank, n_channels)
    else:
        span, work = None, stack

    size = work.shape[1]
    k_work = min(k, size)
    found = np.zeros((size, k_work), dtype=np.complex128)
    iterations: List[int] = []
    for j in range(k_work):
        if j == 0:
            basis = np.eye(size, dtype=np.complex128)
        else:
            basis = linalg.null_space(found[:, :j].conj().T)
        reduced = np.conj(basis.T) @ work @ basis

        if float(np.real(np.trace(reduced, axis1=1, axis2=2)).sum()) <= EXHAUSTED_TRACE:
            # nothing left to explain; complete the basis from the averaged matrix
            _, eigvecs = np.linalg.eigh(reduced.mean(axis=0))
            found[:, j:] = basis @ eigvecs[:, ::-1][:, : k_work - j]
            iterations.extend([0] * (k_work - j))
            logger.debug("Remaining spectrum exhausted after %d components", j)
            break

        q, n_iter = _ascend(reduced, tol, max_iter, j)
        found[:, j] = basis @ q
        iterations.append(n_iter)

    if span is None:
        gamma = found
    else:
        gamma = np.zeros((n_channels, k), dtype=np.complex128)
        gamma[:, :k_work] = span @ found
        # powerless directions complete the basis
        gamma[:, k_work:] = vectors[:, ~in_range][:, ::-1][:, : k - k_work]
        iterations.extend([0] * (k - k_work))

    diagonals = np.real(np.einsum("ek,fed,dk->fk", gamma.conj(), cs.matrices, gamma))
    order = np.argsort(-diagonals.sum(axis=0), kind="stable")
    gamma = fix_phase(gamma[:, order])
    diagonals = diagonals[:, order]
    iterations = [iterations[i] for i in order]

    logger.debug("Stepwise CPC: %d components over %d frequencies, iterations %s", k, n_freqs, iterations)
    return CpcResult(gamma=gamma, diagonals=diagonals, iterations=iterations, freqs=cs.freqs)
