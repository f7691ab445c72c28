"""Sampling-drift compensation by polyphase fractional-delay resampling.

Window ``j`` of the aligned trace is the band-limited interpolation of the
record at ``j T + l dt + j drift``, so a pulse that slips by ``drift`` per
period sits at the same place in every output window.

The interpolator is a Kaiser-windowed sinc prototype.  Its ``up_factor``
polyphase branches are the prototype sampled at offsets ``k + p / U``;
arbitrary offsets evaluate the same continuous prototype directly, which
is the dense-phase limit of the bank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import kaiser_beta

from .errors import DomainError, EstimationError
from .synth import TraceSet

CHUNK_WINDOWS = 1024


@dataclass(frozen=True)
class ResampleConfig:
    up_factor: int = 8
    filter_half_len: int = 16
    stopband_atten: float = 80.0
    cutoff: float = 0.45

    def __post_init__(self):
        if int(self.up_factor) != self.up_factor or self.up_factor < 2:
            raise DomainError(f"up_factor must be an integer >= 2, got {self.up_factor!r}")
        if int(self.filter_half_len) != self.filter_half_len or self.filter_half_len < 2:
            raise DomainError(f"filter_half_len must be an integer >= 2, got {self.filter_half_len!r}")
        if not 0 < self.cutoff <= 0.5:
            raise DomainError(f"cutoff must be in (0, 0.5], got {self.cutoff!r}")
        if self.stopband_atten <= 21:
            raise DomainError("stopband_atten must exceed 21 dB")

    @property
    def sinc_cutoff(self) -> float:
        """Prototype cutoff as a fraction of the input Nyquist frequency:
        halfway between the protected band and Nyquist."""
        return (2 * self.cutoff + 1) / 2

    def to_dict(self) -> dict:
        return dict(vars(self))


def prototype(x, cfg: ResampleConfig):
    """Continuous Kaiser-windowed sinc at offsets ``x`` (input samples)."""
    x = np.asarray(x, dtype=float)
    H = cfg.filter_half_len
    nu = cfg.sinc_cutoff
    beta = kaiser_beta(cfg.stopband_atten)
    u = np.clip(1 - (x / H) ** 2, 0, None)
    win = np.i0(beta * np.sqrt(u)) / np.i0(beta)
    return np.where(np.abs(x) < H, nu * np.sinc(nu * x) * win, 0.0)


def _taps(frac, cfg: ResampleConfig):
    # coefficients c[k] multiplying x[n + k], k = -H+1..H, for output at n + frac
    H = cfg.filter_half_len
    k = np.arange(-H + 1, H + 1)
    c = prototype(np.asarray(frac)[..., None] - k, cfg)
    return c / c.sum(axis=-1, keepdims=True)


def polyphase_bank(cfg: ResampleConfig) -> np.ndarray:
    """``(U, 2H)`` branch coefficients for offsets ``p / U``."""
    return _taps(np.arange(cfg.up_factor) / cfg.up_factor, cfg)


def shift_signal(x, shift: float, cfg: ResampleConfig = ResampleConfig()) -> np.ndarray:
    """``y[n] = x(n + shift)`` by band-limited interpolation, edges reflected."""
    x = np.asarray(x, dtype=float)
    H = cfg.filter_half_len
    n0 = int(np.floor(shift))
    c = _taps(shift - n0, cfg)
    xp = np.pad(x, H + abs(n0) + 1, mode="reflect")
    off = H + abs(n0) + 1 + n0
    idx = off + np.arange(len(x))[:, None] + np.arange(-H + 1, H + 1)[None, :]
    return xp[idx] @ c


def align(trace: TraceSet, drift_per_period: float, cfg: ResampleConfig = ResampleConfig(),
          exclude_edges: bool = True) -> TraceSet:
    """Re-sample every window ``j`` shifted by ``-j drift``.

    Windows whose source range runs past the recorded data (beyond the
    reflection margin) are dropped; the first and last kept windows are
    flagged.  Raises ``DomainError`` if the drift is so large that more
    than half of the windows would be lost.
    """
    grid = trace.grid
    L, J = grid.L, trace.J
    H = cfg.filter_half_len
    delta = drift_per_period / grid.dt  # samples per period
    x = trace.samples
    n_tot = len(x)
    j = np.arange(J)
    start = j * L + j * delta
    keep = (start >= 0) & (start + L - 1 <= n_tot - 1)
    kept = j[keep]
    if len(kept) < max(1, J / 2):
        raise DomainError(
            f"drift {drift_per_period:.3e} s/period moves {J - len(kept)} of {J} windows outside the record")
    xp = np.pad(x, H, mode="reflect")
    k = np.arange(-H + 1, H + 1)
    out = np.empty((len(kept), L))
    for s in range(0, len(kept), CHUNK_WINDOWS):
        jj = kept[s:s + CHUNK_WINDOWS]
        st = jj * L + jj * delta
        n0 = np.floor(st).astype(np.int64)
        c = _taps(st - n0, cfg)  # (w, 2H)
        idx = H + n0[:, None, None] + np.arange(L)[None, :, None] + k[None, None, :]
        out[s:s + len(jj)] = np.einsum("wlk,wk->wl", xp[idx], c)
    flagged = [0, len(kept) - 1] if exclude_edges and len(kept) > 2 else []
    res = trace.with_samples(out.ravel(), aligned_drift=drift_per_period,
                             dropped=[int(i) for i in j[~keep]], flagged=flagged,
                             resample=cfg.to_dict())
    res.truth.pop("offset_corrected", None)
    if trace.quadratures is not None and len(trace.quadratures) == J:
        res.quadratures = np.asarray(trace.quadratures)[kept]
    return res


# --- drift estimation ----------------------------------------------------------

def _fft_shift(profile, s):
    # circular shift by s samples (positive delays the profile)
    n = len(profile)
    f = np.fft.rfftfreq(n)
    return np.fft.irfft(np.fft.rfft(profile) * np.exp(-2j * np.pi * f * s), n)


def _xcorr_peak(a, template):
    n = len(a)
    cc = np.fft.irfft(np.fft.rfft(a - a.mean()) * np.conj(np.fft.rfft(template - template.mean())), n)
    k = int(np.argmax(cc))
    y0, y1, y2 = cc[k - 1], cc[k], cc[(k + 1) % n]
    den = y0 - 2 * y1 + y2
    frac = 0.5 * (y0 - y2) / den if den < 0 else 0.0
    s = k + frac
    return s - n if s > n / 2 else s


def estimate_drift(trace: TraceSet, block: int | None = None, n_iter: int = 3) -> float:
    """Drift per period (s) from the slip of the pulse energy profile.

    The mean-square profile of consecutive blocks of windows is
    cross-correlated with a template (the drift-compensated mean profile)
    and the peak located with parabolic sub-sample interpolation; a line
    fitted to the unwrapped peak positions gives the slip per window,
    which is converted to drift per period.
    """
    grid = trace.grid
    L = grid.L
    W = trace.windows
    J = len(W)
    if block is None:
        block = int(np.clip(J // 64, 4, 64))
    nb = J // block
    if nb < 4:
        raise EstimationError(f"need at least {4 * block} windows to estimate drift, got {J}")
    prof = (W[: nb * block] ** 2).reshape(nb, block, L).mean(axis=1)
    centres = (np.arange(nb) + 0.5) * block - 0.5

    # start from successive-block slips, which a smeared template cannot bias
    steps = np.array([_xcorr_peak(prof[i + 1], prof[i]) for i in range(nb - 1)])
    delta = float(np.median(steps)) / block
    for _ in range(n_iter):
        template = np.mean([_fft_shift(p, -delta * c) for p, c in zip(prof, centres)], axis=0)
        shifts = np.array([_xcorr_peak(p, template) for p in prof])
        pred = delta * centres
        shifts = pred + (shifts - pred + L / 2) % L - L / 2  # unwrap around the current fit
        delta = float(np.polyfit(centres, shifts, 1)[0])
    template = np.mean([_fft_shift(p, -delta * c) for p, c in zip(prof, centres)], axis=0)
    resid = np.array([_fft_shift(p, -delta * c) for p, c in zip(prof, centres)]) - template
    noise = np.std(resid) / np.sqrt(nb)
    contrast = (template.max() - np.median(template)) / max(noise, 1e-300)
    if not np.isfinite(contrast) or contrast < 3:
        raise EstimationError(f"no detectable pulses (peak SNR {contrast:.2f} < 3)")
    # content slips by s = drift T / (T + drift) per window: after each wrap
    # the window holds the previous pulse, which sits T + drift earlier
    s = delta * grid.dt
    return s * grid.T / (grid.T - s)
