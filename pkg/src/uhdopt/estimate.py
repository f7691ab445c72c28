"""Kernel estimation from traces by windowed sample second moments."""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DomainError
from .kernels import KernelMatrix, Provenance, Role
from .synth import TraceSet

MIN_WINDOWS = 100
BLOCK = 4096


class InsufficientStatisticsWarning(UserWarning):
    pass


def offset_correct(trace: TraceSet) -> TraceSet:
    """Subtract the per-index mean over windows."""
    if trace.J < 2:
        raise DomainError("offset correction needs J >= 2")
    W = trace.windows
    out = W - W.mean(axis=0)
    # a second pass removes the rounding residue of the first
    out -= out.mean(axis=0)
    return trace.with_samples(out.ravel(), offset_corrected=True)


def second_moment(windows: np.ndarray, block: int = BLOCK) -> np.ndarray:
    """``(1/J) sum_j v_j v_j^T`` accumulated over fixed-size blocks in order."""
    J, L = windows.shape
    acc = np.zeros((L, L))
    for s in range(0, J, block):
        B = windows[s:s + block]
        acc += B.T @ B
    acc /= J
    return (acc + acc.T) / 2


def estimate_kernel(trace: TraceSet, role, *, exclude_flagged: bool = True) -> KernelMatrix:
    """Sample second-moment kernel of an offset-corrected trace.

    Windows listed in ``trace.truth["flagged"]`` (edge windows of an
    aligned trace) are skipped unless ``exclude_flagged`` is false.
    """
    role = Role(role)
    W = trace.windows
    flagged = trace.truth.get("flagged", []) if exclude_flagged else []
    if flagged:
        keep = np.ones(len(W), bool)
        keep[np.asarray(flagged, dtype=int)] = False
        W = W[keep]
    J = len(W)
    if J == 0:
        raise DomainError("no windows left to estimate from")
    notes = []
    if J < MIN_WINDOWS:
        msg = f"only {J} windows (< {MIN_WINDOWS}); kernel estimate is noisy"
        warnings.warn(msg, InsufficientStatisticsWarning, stacklevel=2)
        notes.append(msg)
    if not trace.truth.get("offset_corrected"):
        notes.append("input was not offset-corrected")
    return KernelMatrix(role, trace.grid, second_moment(W), Provenance("estimated", J, tuple(notes)))


def moment_sigma(K: np.ndarray, J: int) -> np.ndarray:
    """Standard error of each second-moment entry for a zero-mean Gaussian
    process with covariance ``K``: ``sqrt((K_ll K_mm + K_lm^2) / J)``."""
    d = np.diag(K)
    return np.sqrt((np.outer(d, d) + K**2) / J)


def pulse_overlay(trace: TraceSet, block: int) -> np.ndarray:
    """``(J // block, block * L)`` segments for overlaid plotting."""
    if block < 1 or trace.J < block:
        raise DomainError(f"block must be in [1, J={trace.J}], got {block}")
    n = trace.J // block
    if n * block != trace.J:
        warnings.warn(f"dropping {trace.J - n * block} trailing windows", stacklevel=2)
    return trace.samples[: n * block * trace.grid.L].reshape(n, block * trace.grid.L)
