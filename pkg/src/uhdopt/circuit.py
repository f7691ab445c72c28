"""Transimpedance homodyne detector circuit model.

The photodiode pair is a current source with parallel capacitance ``C_p``
(per diode) feeding a single-pole op-amp transimpedance stage.  The model is
a second-order low-pass with characteristic frequency ``f0`` and damping
``p``; ``p < 2`` rings, ``p > 2`` is overdamped.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

# CODATA 2018 (exact in the 2019 SI)
E_CHARGE = 1.602176634e-19  # C
H_PLANCK = 6.62607015e-34  # J s
C_LIGHT = 299792458.0  # m / s
K_BOLTZMANN = 1.380649e-23  # J / K

CRITICAL_BAND = 1e-6


@dataclass(frozen=True)
class CircuitParams:
    R_f: float
    C_f: float
    C_p: float
    C_a: float = 2e-12
    GBW: float = 3.9e9
    i_n: float = 2.5e-12
    e_n: float = 0.89e-9
    T_e: float = 298.15
    eta_PD: float = 0.9

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v <= 0:
                raise DomainError(f"CircuitParams.{f.name} must be positive, got {v!r}")
        if self.eta_PD > 1:
            raise DomainError(f"CircuitParams.eta_PD must be in (0, 1], got {self.eta_PD!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict, path: str = "circuit") -> "CircuitParams":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown field")
        try:
            return cls(**{k: float(v) for k, v in d.items()})
        except TypeError as exc:
            raise ConfigError(path, str(exc)) from None
        except DomainError as exc:
            name = str(exc).split()[0].split(".")[-1]
            raise ConfigError(f"{path}.{name}", str(exc)) from None


@dataclass(frozen=True)
class DerivedParams:
    """Second-order model constants.  ``R_f`` and ``eta_PD`` are carried
    along so downstream code needs only this object."""

    C_t: float
    f0: float
    p: float
    n_c: float
    n_f: float
    R_f: float
    eta_PD: float

    @property
    def omega0(self) -> float:
        return 2 * np.pi * self.f0


@dataclass(frozen=True)
class LOConfig:
    P_LO: float = 2.7e-3
    wavelength: float = 800e-9
    T: float = 12.5e-9

    def __post_init__(self):
        if not (self.P_LO >= 0 and np.isfinite(self.P_LO)):
            raise DomainError(f"LOConfig.P_LO must be >= 0, got {self.P_LO!r}")
        for name in ("wavelength", "T"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise DomainError(f"LOConfig.{name} must be positive, got {v!r}")


PRESETS: dict[str, CircuitParams] = {
    "set1": CircuitParams(R_f=3.3e3, C_f=1.0e-12, C_p=4.0e-12),
    "set2": CircuitParams(R_f=1.0e3, C_f=1.5e-12, C_p=5.0e-12),
    "set3": CircuitParams(R_f=1.0e3, C_f=1.0e-12, C_p=8.0e-12),
}

# f0 (MHz), p as tabulated for the presets
PRESET_TABLE = {"set1": (130.8, 2.74), "set2": (214.4, 2.08), "set3": (180.7, 1.18)}


def preset(name: str, **overrides) -> CircuitParams:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError("circuit", f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if overrides:
        return CircuitParams(**{**base.to_dict(), **overrides})
    return base


def load_circuit(path: str | Path) -> CircuitParams:
    with open(path) as fh:
        d = json.load(fh)
    if isinstance(d, str):
        return preset(d)
    return CircuitParams.from_dict(d)


def derive_params(cp: CircuitParams) -> DerivedParams:
    C_t = 2 * cp.C_p + cp.C_f + cp.C_a
    f0 = np.sqrt(cp.GBW / (2 * np.pi * cp.R_f * C_t))
    p = f0 * (2 * np.pi * cp.R_f * cp.C_f + 1 / cp.GBW)
    n_c = cp.e_n**2 + 4 * K_BOLTZMANN * cp.T_e * cp.R_f + cp.i_n**2 * cp.R_f**2
    n_f = 4 * np.pi**2 * cp.e_n**2 * cp.R_f**2 * C_t**2 * f0**2
    return DerivedParams(C_t=C_t, f0=float(f0), p=float(p), n_c=n_c, n_f=float(n_f),
                         R_f=cp.R_f, eta_PD=cp.eta_PD)


def electronic_psd(dp: DerivedParams, f):
    """Two-sided electronic-noise PSD in V^2/Hz."""
    fb2 = (np.asarray(f, dtype=float) / dp.f0) ** 2
    return (dp.n_c + dp.n_f * fb2) / (1 + (dp.p**2 - 2) * fb2 + fb2**2)


def transfer_function(dp: DerivedParams, f):
    fb = np.asarray(f, dtype=float) / dp.f0
    return dp.R_f / (1 + 1j * dp.p * fb - fb**2)


def _poles(dp: DerivedParams):
    w0 = dp.omega0
    disc = np.sqrt(dp.p**2 - 4 + 0j)
    return w0 * (-dp.p + disc) / 2, w0 * (-dp.p - disc) / 2


def impulse_response(dp: DerivedParams, t):
    """Causal impulse response r(t) in V/C (equivalently Ohm/s).

    Inverse transform of ``R_f w0^2 / (s^2 + p w0 s + w0^2)`` evaluated in
    closed form for the three damping regimes; integrates to ``R_f``.
    """
    t = np.asarray(t, dtype=float)
    w0 = dp.omega0
    pos = t > 0
    tp = np.where(pos, t, 0.0)
    k = dp.R_f * w0**2
    if abs(dp.p - 2) < CRITICAL_BAND:
        out = k * tp * np.exp(-w0 * tp)
    elif dp.p < 2:
        sigma = dp.p * w0 / 2
        wd = w0 * np.sqrt(1 - dp.p**2 / 4)
        out = (k / wd) * np.exp(-sigma * tp) * np.sin(wd * tp)
    else:
        s1, s2 = (s.real for s in _poles(dp))
        out = k * (np.exp(s1 * tp) - np.exp(s2 * tp)) / (s1 - s2)
    return np.where(pos, out, 0.0)


def peak_time(dp: DerivedParams) -> float:
    """Time of the global maximum of r(t)."""
    w0 = dp.omega0
    if abs(dp.p - 2) < CRITICAL_BAND:
        return 1 / w0
    if dp.p < 2:
        sigma = dp.p * w0 / 2
        wd = w0 * np.sqrt(1 - dp.p**2 / 4)
        return float(np.arctan2(wd, sigma) / wd)
    s1, s2 = (s.real for s in _poles(dp))
    return float(np.log(s2 / s1) / (s1 - s2))


def decay_time(dp: DerivedParams) -> float:
    """1/e envelope time of the slowest pole."""
    s1, s2 = _poles(dp)
    return float(1 / min(-s1.real, -s2.real))


def lo_photon_number(lo: LOConfig) -> float:
    """Mean LO photons per pulse."""
    return lo.P_LO * lo.wavelength * lo.T / (H_PLANCK * C_LIGHT)
