"""Temporal weight vectors: conventional baselines and the SNR optimum.

The optimum maximises the generalized Rayleigh quotient
``w^T S w / w^T E w`` with ``w`` restricted to the span of the lowest
``2N + 1`` real Fourier vectors on the window (cutoff ``f_c = N / T``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from .circuit import DerivedParams, impulse_response
from .errors import ConditioningError, DomainError, ShapeError
from .kernels import (KernelMatrix, SamplingGrid, _mat, _resolve_delay, eig_decompose,
                      snr_of_weight)


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray = field(repr=False)
    method: str  # "constant" | "peak" | "optimal" | "custom"
    N: int | None = None
    f_c: float | None = None
    width: float | None = None
    achieved_snr: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return len(self.values)

    def evaluated(self, S, E) -> "WeightVector":
        return replace(self, achieved_snr=snr_of_weight(self, S, E))

    def meta(self) -> dict:
        return {"method": self.method, "N": self.N, "f_c": self.f_c, "width": self.width,
                "achieved_snr": self.achieved_snr, "L": self.L}


@dataclass(frozen=True)
class TruncationBasis:
    L: int
    N: int
    U: np.ndarray = field(repr=False)


def fourier_basis(L: int, N: int) -> TruncationBasis:
    """Columns ``u^(0..2N)``: constant, then alternating sin/cos pairs at
    ``1, 2, ..., N`` cycles per window."""
    if N < 0 or 2 * N + 1 >= L:
        raise DomainError(f"need 0 <= N and 2N+1 < L (N={N}, L={L})")
    l = np.arange(L)
    U = np.empty((L, 2 * N + 1))
    U[:, 0] = np.sqrt(1 / L)
    for n in range(1, 2 * N + 1):
        if n % 2:
            U[:, n] = np.sqrt(2 / L) * np.sin((n + 1) * np.pi * l / L)
        else:
            U[:, n] = np.sqrt(2 / L) * np.cos(n * np.pi * l / L)
    U.setflags(write=False)
    return TruncationBasis(L, N, U)


def _leading_response_vector(S, E):
    _, vecs = eig_decompose(_mat(S) - _mat(E), tol=1e-9)
    return vecs[:, 0]


def solve_reduced(St: np.ndarray, Et: np.ndarray):
    """Largest generalized eigenpair of ``St x = g Et x`` via Cholesky of Et."""
    try:
        C = np.linalg.cholesky(Et)
    except np.linalg.LinAlgError:
        lam_min = np.linalg.eigvalsh(Et)[0]
        raise ConditioningError(
            f"reduced electronic kernel is not positive definite (smallest eigenvalue {lam_min:.3e})"
        ) from None
    Y = solve_triangular(C, St, lower=True)
    M = solve_triangular(C, Y.T, lower=True)
    M = (M + M.T) / 2
    g, Z = np.linalg.eigh(M)
    x = solve_triangular(C.T, Z[:, -1], lower=False)
    return float(g[-1]), x


def optimize_weight(S, E, N: int, ridge: float = 1e-10, *, T: float | None = None) -> WeightVector:
    """SNR-optimal weight within the cutoff ``N`` Fourier subspace."""
    Sm, Em = _mat(S), _mat(E)
    if Sm.shape != Em.shape or Sm.shape[0] != Sm.shape[1]:
        raise ShapeError(f"S {Sm.shape} and E {Em.shape} must be equal square matrices")
    L = Sm.shape[0]
    U = fourier_basis(L, N).U
    St = U.T @ Sm @ U
    Et = U.T @ Em @ U
    St = (St + St.T) / 2
    Et = (Et + Et.T) / 2
    Et = Et + ridge * np.trace(Et) / (2 * N + 1) * np.eye(2 * N + 1)
    gamma, x = solve_reduced(St, Et)
    w = U @ x
    w /= np.linalg.norm(w)
    if w @ _leading_response_vector(Sm, Em) < 0:
        w = -w
    if T is None:
        T = getattr(getattr(S, "grid", None), "T", None)
    return WeightVector(w, "optimal", N=N, f_c=None if T is None else N / T, achieved_snr=gamma)


def constant_weight(L: int) -> WeightVector:
    return WeightVector(np.ones(L), "constant", N=0, f_c=0.0)


def peak_weight(R: KernelMatrix, width: float = 0.5e-9) -> WeightVector:
    """Boxcar of ``width`` seconds centred on the maximum of diag(R)."""
    grid = R.grid
    n = int(round(width / grid.dt))
    if width < grid.dt * (1 - 1e-9) or n < 1:
        raise DomainError(f"peak width {width!r} s is shorter than one sample ({grid.dt!r} s)")
    n = min(n, grid.L)
    centre = int(np.argmax(np.diag(R.values)))
    start = centre - (n - 1) // 2
    start = min(max(start, 0), grid.L - n)
    w = np.zeros(grid.L)
    w[start:start + n] = 1.0
    return WeightVector(w, "peak", width=n * grid.dt)


def snr_vs_cutoff(S, E, N_max: int, ridge: float = 1e-10, T: float | None = None):
    """Optimal SNR for every cutoff order ``0..N_max``.

    Returns a list of ``(N, f_c, snr, weight)`` tuples.
    """
    rows = []
    for N in range(N_max + 1):
        w = optimize_weight(S, E, N, ridge, T=T)
        rows.append((N, w.f_c, w.achieved_snr, w))
    return rows


def crosstalk_coeffs(w, dp: DerivedParams, grid: SamplingGrid, d_max: int,
                     delay: float | None = None) -> dict[int, float]:
    """r_bar(d) = integral over the window of ``w(t) r(t + d T - delay)``.

    ``d = j - k``: the contribution of pulse ``k`` to measurement ``j``.
    """
    v = np.asarray(getattr(w, "values", w), dtype=float)
    if len(v) != grid.L:
        raise ShapeError(f"weight length {len(v)} != L {grid.L}")
    d0 = _resolve_delay(dp, grid, delay)
    return {d: float(v @ impulse_response(dp, grid.times + d * grid.T - d0) * grid.dt)
            for d in range(-d_max, d_max + 1)}
