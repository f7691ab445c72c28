"""Second-moment kernels on one measurement window.

``E`` is the electronic-noise autocorrelation, ``R`` the photocurrent
response and ``S = E + R`` the vacuum (shot-noise) second moment.  All are
``L x L`` matrices sampled at ``t_l = l T / L`` relative to the window start.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import sici

from .circuit import (E_CHARGE, DerivedParams, LOConfig, decay_time, electronic_psd,
                      impulse_response, lo_photon_number, peak_time)
from .errors import AccuracyError, DomainError, ShapeError


class DecayWarning(UserWarning):
    """Impulse response has not decayed within one period."""


class Role(str, enum.Enum):
    ELECTRONIC = "Electronic"
    SHOT = "Shot"
    RESPONSE = "Response"


@dataclass(frozen=True)
class SamplingGrid:
    L: int = 125
    T: float = 12.5e-9

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise DomainError(f"SamplingGrid.L must be an integer >= 2, got {self.L!r}")
        if not self.T > 0:
            raise DomainError(f"SamplingGrid.T must be positive, got {self.T!r}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def dt(self) -> float:
        return self.T / self.L

    @property
    def sample_rate(self) -> float:
        return self.L / self.T

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.L) * self.dt

    def to_dict(self) -> dict:
        return {"L": self.L, "T": self.T}


@dataclass(frozen=True)
class Provenance:
    kind: str = "model"  # "model" | "estimated"
    n_windows: int | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_windows": self.n_windows, "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(kind=d.get("kind", "model"), n_windows=d.get("n_windows"),
                   notes=tuple(d.get("notes", ())))


@dataclass(frozen=True)
class KernelMatrix:
    role: Role
    grid: SamplingGrid
    values: np.ndarray = field(repr=False)
    provenance: Provenance = Provenance()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.L, self.grid.L):
            raise ShapeError(f"kernel shape {v.shape} does not match grid L={self.grid.L}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "role", Role(self.role))

    @property
    def asymmetry(self) -> float:
        scale = np.max(np.abs(self.values)) or 1.0
        return float(np.max(np.abs(self.values - self.values.T)) / scale)

    def min_eig_ratio(self) -> float:
        """Smallest eigenvalue divided by the trace."""
        tr = np.trace(self.values)
        lam = np.linalg.eigvalsh((self.values + self.values.T) / 2)
        return float(lam[0] / tr) if tr else 0.0


def _check_same_grid(a: KernelMatrix, b: KernelMatrix):
    if a.grid != b.grid:
        raise ShapeError(f"grid mismatch: {a.grid} vs {b.grid}")


def add(E: KernelMatrix, R: KernelMatrix) -> KernelMatrix:
    _check_same_grid(E, R)
    return KernelMatrix(Role.SHOT, E.grid, E.values + R.values, _merge_prov(E, R))


def subtract(S: KernelMatrix, E: KernelMatrix) -> KernelMatrix:
    _check_same_grid(S, E)
    return KernelMatrix(Role.RESPONSE, S.grid, S.values - E.values, _merge_prov(S, E))


def _merge_prov(a: KernelMatrix, b: KernelMatrix) -> Provenance:
    if a.provenance.kind == b.provenance.kind == "model":
        return Provenance()
    ns = [p.n_windows for p in (a.provenance, b.provenance) if p.n_windows]
    return Provenance("estimated", min(ns) if ns else None,
                      a.provenance.notes + b.provenance.notes)


# --- electronic noise --------------------------------------------------------

def _cos_transform(psd_vals, f, lags):
    # two-sided integral of an even spectrum, trapezoid rule on [0, f_max]
    w = np.full(f.shape, f[1] - f[0])
    w[0] = w[-1] = w[0] / 2
    g = psd_vals * w
    out = np.zeros(len(lags))
    step = 16384
    for i in range(0, len(f), step):
        out += np.cos(2 * np.pi * np.outer(lags, f[i:i + step])) @ g[i:i + step]
    return 2 * out


def _asymptotic_tail(dp: DerivedParams, f_max: float, lags):
    # 2 * int_{f_max}^inf n_f f0^2 cos(2 pi f tau) / f^2 df
    x = 2 * np.pi * f_max * np.abs(lags)
    si, _ = sici(x)
    val = np.cos(x) / f_max - 2 * np.pi * np.abs(lags) * (np.pi / 2 - si)
    return 2 * dp.n_f * dp.f0**2 * val


def electronic_autocorr(dp: DerivedParams, lags, *, resolution: float = 200.0,
                        span: float = 400.0, check: bool = True):
    """E(tau) = inverse Fourier transform of ``electronic_psd`` at ``lags``.

    The spectrum is integrated on ``[0, span * f0]`` with step ``f0/resolution``;
    the remaining ``1/f^2`` tail is added in closed form.  With ``check``
    the transform is repeated at doubled resolution and span, and an
    ``AccuracyError`` is raised if any lag moves by more than 0.1 % of E(0).
    """
    lags = np.atleast_1d(np.asarray(lags, dtype=float))

    def once(res, sp):
        f_max = sp * dp.f0
        f = np.linspace(0.0, f_max, int(round(sp * res)) + 1)
        return _cos_transform(electronic_psd(dp, f), f, lags) + _asymptotic_tail(dp, f_max, lags)

    e = once(resolution, span)
    if check:
        e2 = once(2 * resolution, 2 * span)
        scale = max(abs(e2[lags == 0][0]) if np.any(lags == 0) else np.max(np.abs(e2)), 1e-300)
        err = np.max(np.abs(e - e2)) / scale
        if err > 1e-3:
            raise AccuracyError(f"electronic autocorrelation not converged (rel change {err:.2e})")
    return e


def electronic_autocorr_closed(dp: DerivedParams, lags):
    """Closed-form E(tau) by residues.

    With ``x = (f/f0)^2`` the PSD denominator factors as ``(x + a)(x + b)``;
    each partial fraction transforms to a decaying (possibly complex)
    exponential.  Falls back to the numerical transform when ``a == b``.
    """
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    s = dp.p**2 - 2
    disc = np.sqrt(complex(s * s - 4))
    if abs(disc) < 1e-6:
        return electronic_autocorr(dp, lags, check=False)
    a, b = (s + disc) / 2, (s - disc) / 2
    A = (dp.n_c - dp.n_f * a) / (b - a)
    B = (dp.n_c - dp.n_f * b) / (a - b)
    k = 2 * np.pi * dp.f0 * np.abs(lags)
    sa, sb = np.sqrt(a), np.sqrt(b)
    return (dp.f0 * np.pi * (A * np.exp(-sa * k) / sa + B * np.exp(-sb * k) / sb)).real


def _toeplitz(grid: SamplingGrid, e_lags) -> np.ndarray:
    idx = np.abs(np.subtract.outer(np.arange(grid.L), np.arange(grid.L)))
    return np.asarray(e_lags)[idx]


def build_E(dp: DerivedParams, grid: SamplingGrid, *,
            psd: Callable[[np.ndarray], np.ndarray] | None = None,
            band: float | None = None, check: bool = True) -> KernelMatrix:
    """Electronic-noise kernel from the circuit PSD (Wiener-Khinchin).

    ``psd``/``band`` override the circuit spectrum with an arbitrary even PSD
    that is zero above ``band`` Hz.
    """
    lags = grid.times
    if psd is None:
        e = electronic_autocorr(dp, lags, check=check)
    else:
        if band is None or band <= 0:
            raise DomainError("a PSD override needs a positive band limit")
        n = int(max(20000, 50 * band * grid.T))
        f = np.linspace(0.0, band, n + 1)
        e = _cos_transform(np.asarray(psd(f), dtype=float), f, lags)
    return KernelMatrix(Role.ELECTRONIC, grid, _toeplitz(grid, e))


# --- response ----------------------------------------------------------------

def centered_delay(dp: DerivedParams, T: float) -> float:
    """Pulse arrival time that puts the response peak at T/2."""
    return T / 2 - peak_time(dp)


def _resolve_delay(dp, grid, delay):
    return centered_delay(dp, grid.T) if delay is None else float(delay)


def n_periods_to_decay(dp: DerivedParams, T: float, rel: float = 1e-12) -> int:
    """Number of periods after which |r| stays below ``rel`` of its peak."""
    tau = decay_time(dp)
    span = peak_time(dp) + tau * np.log(1 / rel) + 5 * tau
    return int(np.ceil(span / T))


def window_response(dp: DerivedParams, grid: SamplingGrid, delay: float | None = None,
                    periodic: bool = True) -> np.ndarray:
    """Response of one pulse as seen within its measurement window.

    With ``periodic`` the response is folded onto the window,
    ``sum_m r(t_l - delay + m T)``, which is what the inverse transform of the
    transfer function evaluated on the repetition-rate harmonics returns.  It
    equals the plain sampled ``r(t_l - delay)`` when r decays within a period.
    """
    d = _resolve_delay(dp, grid, delay)
    t = grid.times - d
    if not periodic:
        return impulse_response(dp, t)
    m = n_periods_to_decay(dp, grid.T) + 1
    return sum(impulse_response(dp, t + k * grid.T) for k in range(m + 1))


def decay_residual(dp: DerivedParams, T: float) -> float:
    """max |r(t)| for t >= T after arrival, relative to the peak."""
    tt = T + np.linspace(0, 5 * decay_time(dp), 2001)
    return float(np.max(np.abs(impulse_response(dp, tt))) / impulse_response(dp, peak_time(dp)))


def response_scale(dp: DerivedParams, lo: LOConfig) -> float:
    """eta_PD e^2 |alpha_p|^2, the variance scale of the response kernel."""
    return dp.eta_PD * E_CHARGE**2 * lo_photon_number(lo)


def build_R(dp: DerivedParams, grid: SamplingGrid, lo: LOConfig,
            delay: float | None = None) -> KernelMatrix:
    """Rank-one response kernel, outer product of the window response."""
    resid = decay_residual(dp, grid.T)
    notes = ()
    if resid > 0.01:
        msg = f"impulse response at one period is {resid:.2%} of peak; consider build_R_crosstalk"
        warnings.warn(msg, DecayWarning, stacklevel=2)
        notes = (msg,)
    rho = window_response(dp, grid, delay, periodic=True)
    return KernelMatrix(Role.RESPONSE, grid, response_scale(dp, lo) * np.outer(rho, rho),
                        Provenance(notes=notes))


def build_R_crosstalk(dp: DerivedParams, grid: SamplingGrid, lo: LOConfig,
                      n_neighbors: int, delay: float | None = None) -> KernelMatrix:
    """Response kernel including pulses ``k = -n .. n`` around the window's own.

    Each pulse carries an independent quadrature, so contributions add
    incoherently (a sum of outer products).
    """
    if n_neighbors < 0:
        raise DomainError("n_neighbors must be >= 0")
    d = _resolve_delay(dp, grid, delay)
    acc = np.zeros((grid.L, grid.L))
    for k in range(-n_neighbors, n_neighbors + 1):
        rk = impulse_response(dp, grid.times - d - k * grid.T)
        acc += np.outer(rk, rk)
    return KernelMatrix(Role.RESPONSE, grid, response_scale(dp, lo) * acc)


# --- analysis ----------------------------------------------------------------

def eig_decompose(K: KernelMatrix | np.ndarray, tol: float = 1e-12):
    """Eigenvalues (descending) and orthonormal eigenvectors (columns).

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    M = K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    scale = np.max(np.abs(M)) or 1.0
    if np.max(np.abs(M - M.T)) > tol * scale:
        raise DomainError("eig_decompose needs a symmetric matrix")
    lam, U = np.linalg.eigh((M + M.T) / 2)
    lam, U = lam[::-1], U[:, ::-1]
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1
    return lam, U * signs


def _values(w):
    return np.asarray(getattr(w, "values", w), dtype=float)


def _mat(K):
    return K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)


def snr_of_weight(w, S, E) -> float:
    """Linear SNR  w^T S w / w^T E w."""
    v = _values(w)
    den = v @ _mat(E) @ v
    if not den > 0:
        raise DomainError(f"degenerate denominator w^T E w = {den!r}")
    return float(v @ _mat(S) @ v / den)


def efficiency_from_snr(snr: float) -> float:
    if not snr >= 1:
        raise DomainError(f"SNR {snr!r} < 1: electronic noise exceeds shot noise")
    return 1.0 - 1.0 / snr


def db(x):
    return 10 * np.log10(x)


def from_db(x):
    return 10 ** (np.asarray(x) / 10)
