"""Synthetic detector traces: electronic noise plus the pulse-train response.

Random streams are Philox generators keyed by ``(seed, purpose, chunk)`` so
every component can be regenerated independently and chunked generation is
identical to one-shot generation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import oaconvolve

from .circuit import (E_CHARGE, CircuitParams, DerivedParams, LOConfig, decay_time,
                      impulse_response, lo_photon_number)
from .errors import DomainError
from .kernels import SamplingGrid, _resolve_delay, electronic_autocorr_closed, n_periods_to_decay

STREAM_QUADRATURE = 1
STREAM_ELECTRONIC = 2
NOISE_CHUNK = 1 << 20


class Phase(str, enum.Enum):
    SQUEEZING = "squeezing"
    ANTI_SQUEEZING = "anti-squeezing"


@dataclass(frozen=True)
class StateSpec:
    kind: str = "vacuum"  # "vacuum" | "squeezed"
    r: float = 0.0
    eta0: float = 1.0
    phase: Phase = Phase.SQUEEZING

    def __post_init__(self):
        if self.kind not in ("vacuum", "squeezed"):
            raise DomainError(f"unknown state kind {self.kind!r}")
        if self.r < 0:
            raise DomainError(f"squeezing parameter must be >= 0, got {self.r!r}")
        if not 0 < self.eta0 <= 1:
            raise DomainError(f"eta0 must be in (0, 1], got {self.eta0!r}")
        object.__setattr__(self, "phase", Phase(self.phase))

    @classmethod
    def vacuum(cls) -> "StateSpec":
        return cls()

    @classmethod
    def squeezed(cls, r: float, eta0: float, phase="squeezing") -> "StateSpec":
        return cls("squeezed", r, eta0, Phase(phase))

    @property
    def variance(self) -> float:
        if self.kind == "vacuum":
            return 1.0
        sign = -1 if self.phase is Phase.SQUEEZING else 1
        return (1 - self.eta0) + self.eta0 * np.exp(sign * 2 * self.r)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "r": self.r, "eta0": self.eta0, "phase": self.phase.value}


@dataclass
class TraceSet:
    grid: SamplingGrid
    samples: np.ndarray = field(repr=False)
    seed: int | None = None
    truth: dict = field(default_factory=dict)
    quadratures: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=float).ravel()
        if len(self.samples) % self.grid.L:
            raise DomainError(f"{len(self.samples)} samples is not a multiple of L={self.grid.L}")

    @property
    def J(self) -> int:
        return len(self.samples) // self.grid.L

    @property
    def windows(self) -> np.ndarray:
        """``(J, L)`` view of the samples."""
        return self.samples.reshape(self.J, self.grid.L)

    def with_samples(self, samples, **truth) -> "TraceSet":
        return TraceSet(self.grid, samples, self.seed, {**self.truth, **truth}, self.quadratures)


def _rng(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(purpose, index))
    return np.random.Generator(np.random.Philox(ss))


def synth_quadratures(state: StateSpec, J: int, seed: int) -> np.ndarray:
    if J < 1:
        raise DomainError("J must be >= 1")
    return np.sqrt(state.variance) * _rng(seed, STREAM_QUADRATURE).standard_normal(J)


def noise_filter(dp: DerivedParams, sample_rate: float, half_len: int | None = None) -> np.ndarray:
    """Zero-phase FIR ``h`` with ``h * h`` equal to the model autocorrelation
    at sample lags.

    Built by circulant embedding: the autocorrelation on a long lag grid is
    transformed to a (clipped non-negative) spectrum whose square root is
    inverse transformed and truncated.
    """
    dt = 1 / sample_rate
    corr = decay_time(dp) / dt
    if half_len is None:
        half_len = int(max(256, np.ceil(8 * corr * np.log(1e6))))
    n_fft = 1 << int(np.ceil(np.log2(8 * half_len)))
    lags = np.arange(n_fft // 2 + 1) * dt
    c = electronic_autocorr_closed(dp, lags)
    c_full = np.concatenate([c, c[-2:0:-1]])
    spec = np.clip(np.fft.rfft(c_full).real, 0, None)
    h = np.fft.irfft(np.sqrt(spec), n_fft)
    return np.concatenate([h[-half_len:], h[:half_len + 1]])


def synth_electronic(dp: DerivedParams, n_samples: int, sample_rate: float, seed: int) -> np.ndarray:
    """Zero-mean stationary Gaussian noise with the circuit's autocorrelation.

    White noise drawn chunk-by-chunk is linearly convolved with
    ``noise_filter`` (no circular wrap), so the output is exactly
    stationary over the whole record.
    """
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    h = noise_filter(dp, sample_rate)
    K = (len(h) - 1) // 2
    n_white = n_samples + 2 * K
    white = np.empty(n_white)
    for i, start in enumerate(range(0, n_white, NOISE_CHUNK)):
        stop = min(start + NOISE_CHUNK, n_white)
        white[start:stop] = _rng(seed, STREAM_ELECTRONIC, i).standard_normal(stop - start)
    return oaconvolve(white, h, mode="valid")


def synth_trace(dp: DerivedParams, grid: SamplingGrid, lo: LOConfig, X, drift: float = 0.0,
                seed: int = 0, *, delay: float | None = None, electronic: bool = True,
                circuit: CircuitParams | None = None, state: StateSpec | None = None) -> TraceSet:
    """Detector voltage for the pulse train carrying quadratures ``X``.

    Pulse ``j`` arrives at ``j T + delay + j drift``; its response is
    ``sqrt(eta_PD) e |alpha_p| r(t - arrival) X_j`` evaluated in continuous
    time, so tails spill into later windows.
    """
    X = np.asarray(X, dtype=float)
    J = len(X)
    if abs(drift) > grid.dt:
        raise DomainError(f"|drift| {abs(drift):.3e} s exceeds one sample per period ({grid.dt:.3e} s)")
    if lo.T != grid.T:
        raise DomainError(f"LO period {lo.T} differs from grid period {grid.T}")
    d = _resolve_delay(dp, grid, delay)
    n = J * grid.L
    amp = np.sqrt(dp.eta_PD) * E_CHARGE * np.sqrt(lo_photon_number(lo))
    if amp > 0 and np.any(X):
        signal = amp * _pulse_train(dp, grid, X, d, drift, n)
    else:
        signal = np.zeros(n)
    if electronic:
        signal += synth_electronic(dp, n, grid.sample_rate, seed)
    truth = {"drift": drift, "delay": d, "lo": vars(lo).copy(), "J": J,
             "electronic": electronic}
    if circuit is not None:
        truth["circuit"] = circuit.to_dict()
    if state is not None:
        truth["state"] = state.to_dict()
    return TraceSet(grid, signal, seed, truth, X)


def _pulse_train(dp, grid, X, d, drift, n):
    dt = grid.dt
    span = n_periods_to_decay(dp, grid.T, 1e-12) * grid.L  # response length, samples
    if drift == 0.0:
        # every pulse sees the same sub-sample phase: one convolution
        n0 = max(int(np.ceil(d / dt)), 0)
        h = impulse_response(dp, (n0 + np.arange(span)) * dt - d)
        train = np.zeros(n - n0)
        train[::grid.L] = X[: len(train[::grid.L])]
        return np.concatenate([np.zeros(n0), oaconvolve(train, h)[: n - n0]])
    res = np.zeros(n)
    step = max(1, (1 << 22) // span)
    offs = np.arange(span)
    for s in range(0, len(X), step):
        j = np.arange(s, min(s + step, len(X)))
        arrival = j * grid.T + d + j * drift
        n0 = np.ceil(arrival / dt).astype(np.int64)
        idx = n0[:, None] + offs[None, :]
        vals = X[j, None] * impulse_response(dp, idx * dt - arrival[:, None])
        keep = idx < n
        res += np.bincount(idx[keep], weights=vals[keep], minlength=n)[:n]
    return res
