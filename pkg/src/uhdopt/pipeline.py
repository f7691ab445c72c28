"""From traces to quadrature outcomes and squeezing figures.

Outcomes ``V_j = sum_l w_l v(t_l + j T)``; sideband quadratures
``Phi = sum_j sin(2 pi f_s j T) V_j`` over disjoint blocks; squeezing and
anti-squeezing levels are variance ratios to a vacuum run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import DomainError, ShapeError
from .kernels import _values, db, efficiency_from_snr
from .optimize import WeightVector
from .synth import TraceSet

CI_LEVEL = 0.95


@dataclass(frozen=True)
class OutcomeSeries:
    values: np.ndarray = field(repr=False)
    weight: WeightVector | None = None
    normalized: bool = False
    vacuum_variance: float | None = None
    kind: str = "outcome"  # "outcome" | "sideband"
    T: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def variance(self) -> float:
        return float(np.var(self.values, ddof=1))


@dataclass(frozen=True)
class SqueezingReport:
    S_sq: float
    S_asq: float
    eta: float | None
    r: float | None
    snr_used: float | None = None
    confidence_db: float | None = None
    eta_sigma: float | None = None
    r_sigma: float | None = None
    counts: dict = field(default_factory=dict)
    predicted: dict | None = None

    @property
    def S_sq_db(self) -> float:
        return float(db(self.S_sq))

    @property
    def S_asq_db(self) -> float:
        return float(db(self.S_asq))

    def to_dict(self) -> dict:
        d = {"S_sq": self.S_sq, "S_asq": self.S_asq, "S_sq_db": self.S_sq_db,
             "S_asq_db": self.S_asq_db, "eta": self.eta, "r": self.r,
             "eta_sigma": self.eta_sigma, "r_sigma": self.r_sigma,
             "snr_used": self.snr_used,
             "snr_used_db": None if self.snr_used is None else float(db(self.snr_used)),
             "confidence_db": self.confidence_db, "confidence_level": CI_LEVEL,
             "counts": self.counts}
        if self.predicted is not None:
            d["predicted"] = self.predicted
        return d

    def table(self) -> str:
        ci = f" +/- {self.confidence_db:.3f}" if self.confidence_db is not None else ""
        rows = [("squeezing", f"{self.S_sq:.5f}", f"{self.S_sq_db:+.3f}{ci}"),
                ("anti-squeezing", f"{self.S_asq:.5f}", f"{self.S_asq_db:+.3f}{ci}")]
        out = [f"{'level':<16}{'linear':>10}  {'dB':<16}"]
        out += [f"{a:<16}{b:>10}  {c:<16}" for a, b, c in rows]
        if self.eta is not None:
            pm = lambda s: f" +/- {s:.4f}" if s is not None else ""
            out.append(f"eta = {self.eta:.4f}{pm(self.eta_sigma)}   r = {self.r:.4f}{pm(self.r_sigma)}")
        if self.snr_used is not None:
            out.append(f"weight SNR = {db(self.snr_used):.2f} dB")
        if self.predicted:
            p = self.predicted
            out.append(f"predicted at {p['snr_new_db']:.2f} dB: S_sq {db(p['S_sq']):+.3f} dB, "
                       f"S_asq {db(p['S_asq']):+.3f} dB")
        return "\n".join(out)


# --- outcomes ------------------------------------------------------------------

def apply_weight(trace: TraceSet, w) -> OutcomeSeries:
    v = _values(w)
    if len(v) != trace.grid.L:
        raise ShapeError(f"weight length {len(v)} != window length {trace.grid.L}")
    wv = w if isinstance(w, WeightVector) else None
    return OutcomeSeries(trace.windows @ v, wv, T=trace.grid.T)


def sideband(series: OutcomeSeries, f_s: float, J_block: int, T: float | None = None) -> OutcomeSeries:
    """One ``Phi`` per disjoint block of ``J_block`` outcomes."""
    T = T if T is not None else series.T
    if T is None:
        raise DomainError("sideband needs the repetition period T")
    cycles = f_s * T * J_block
    if J_block < 1 or abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles) or round(cycles) < 1:
        raise DomainError(f"f_s T J_block = {cycles:.9g} is not a whole number of cycles")
    n = len(series) // J_block
    if n < 1:
        raise DomainError(f"need at least {J_block} outcomes, got {len(series)}")
    s = np.sin(2 * np.pi * f_s * np.arange(J_block) * T)
    phi = series.values[: n * J_block].reshape(n, J_block) @ s
    return OutcomeSeries(phi, series.weight, kind="sideband", T=T)


def normalize(series: OutcomeSeries, vacuum: OutcomeSeries) -> OutcomeSeries:
    var = vacuum.variance
    if not var > 0:
        raise DomainError("vacuum series has zero variance")
    return OutcomeSeries(series.values / np.sqrt(var), series.weight, True, var, series.kind, series.T)


def stats(series) -> tuple[float, float, float]:
    """(unbiased variance, skewness, excess kurtosis)."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if len(x) < 4:
        raise DomainError("stats needs at least 4 values")
    d = x - x.mean()
    m2 = np.mean(d**2)
    if not m2 > 0:
        raise DomainError("degenerate series (zero variance)")
    m3, m4 = np.mean(d**3), np.mean(d**4)
    return float(np.var(x, ddof=1)), float(m3 / m2**1.5), float(m4 / m2**2 - 3)


def corr_d(series, d: int) -> float:
    """Pearson correlation between ``V_j`` and ``V_{j+d}``."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if d < 1 or len(x) <= d + 1:
        raise DomainError(f"need d >= 1 and more than d + 1 values (d={d}, n={len(x)})")
    a, b = x[:-d] - x[:-d].mean(), x[d:] - x[d:].mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if not den > 0:
        raise DomainError("degenerate series (zero variance)")
    return float(np.clip(np.sum(a * b) / den, -1, 1))


# --- squeezing -----------------------------------------------------------------

def forward_levels(eta: float, r: float) -> tuple[float, float]:
    return (1 - eta) + eta * np.exp(-2 * r), (1 - eta) + eta * np.exp(2 * r)


def f_halfwidth_db(n_a: int, n_b: int, level: float = CI_LEVEL) -> float:
    """Half-width (dB) of the variance-ratio confidence interval."""
    return float(db(sps.f.ppf(0.5 + level / 2, n_a - 1, n_b - 1)))


def squeezing_levels(sq: OutcomeSeries, asq: OutcomeSeries, vac: OutcomeSeries) -> dict:
    v = vac.variance
    if not v > 0:
        raise DomainError("vacuum series has zero variance")
    S_sq, S_asq = sq.variance / v, asq.variance / v
    return {"S_sq": S_sq, "S_asq": S_asq, "S_sq_db": float(db(S_sq)), "S_asq_db": float(db(S_asq)),
            "ci_sq_db": f_halfwidth_db(len(sq), len(vac)), "ci_asq_db": f_halfwidth_db(len(asq), len(vac)),
            "counts": {"sq": len(sq), "asq": len(asq), "vac": len(vac)}}


def infer_eta_r(S_sq: float, S_asq: float) -> tuple[float, float]:
    if S_sq + S_asq <= 2:
        raise DomainError(f"S_sq + S_asq = {S_sq + S_asq!r} <= 2: r = 0 limit, eta unidentifiable")
    if S_sq >= 1:
        raise DomainError(f"S_sq = {S_sq!r} >= 1: not squeezed")
    if S_asq <= 1:
        raise DomainError(f"S_asq = {S_asq!r} <= 1: not anti-squeezed")
    eta = (1 - S_sq) * (S_asq - 1) / (S_sq + S_asq - 2)
    r = 0.25 * np.log((S_asq - 1 + eta) / (S_sq - 1 + eta))
    return float(eta), float(r)


def eta_r_sigma(S_sq, S_asq, n_sq, n_asq, n_vac) -> tuple[float, float]:
    """Delta-method standard errors of (eta, r) for Gaussian variance ratios."""
    var_sq = S_sq**2 * (2 / (n_sq - 1) + 2 / (n_vac - 1))
    var_asq = S_asq**2 * (2 / (n_asq - 1) + 2 / (n_vac - 1))
    cov = S_sq * S_asq * 2 / (n_vac - 1)  # shared vacuum denominator
    h = 1e-6
    g = np.empty((2, 2))
    for i, (a, b) in enumerate([(h * S_sq, 0.0), (0.0, h * S_asq)]):
        p = np.array(infer_eta_r(S_sq + a, S_asq + b))
        m = np.array(infer_eta_r(S_sq - a, S_asq - b))
        g[:, i] = (p - m) / (2 * (a + b))
    C = np.array([[var_sq, cov], [cov, var_asq]])
    V = g @ C @ g.T
    return float(np.sqrt(V[0, 0])), float(np.sqrt(V[1, 1]))


def predict_improved(S_sq: float, S_asq: float, snr_old: float, snr_new: float) -> tuple[float, float]:
    """Levels after raising the detector SNR: ``eta -> zeta eta``."""
    if not snr_new >= snr_old >= 1:
        raise DomainError(f"need snr_new >= snr_old >= 1 (got {snr_old!r}, {snr_new!r})")
    eta, r = infer_eta_r(S_sq, S_asq)
    if snr_new == snr_old:
        zeta = 1.0
    elif snr_old > 1:
        zeta = efficiency_from_snr(snr_new) / efficiency_from_snr(snr_old)
    else:
        zeta = np.inf
    if zeta * eta > 1:
        raise DomainError(f"zeta * eta = {zeta * eta:.6f} > 1: inconsistent inputs")
    return tuple(float(x) for x in forward_levels(zeta * eta, r))


def squeezing_enhancement(r: float, eta0: float, snr1: float, snr2: float) -> float:
    """Gain (dB) in squeezing level when the detector SNR rises from snr1 to snr2."""
    if r < 0 or not 0 < eta0 <= 1 or not snr2 >= snr1 >= 1:
        raise DomainError(f"domain: r >= 0, eta0 in (0,1], snr2 >= snr1 >= 1 "
                          f"(r={r!r}, eta0={eta0!r}, snr1={snr1!r}, snr2={snr2!r})")
    s1 = forward_levels(efficiency_from_snr(snr1) * eta0, r)[0]
    s2 = forward_levels(efficiency_from_snr(snr2) * eta0, r)[0]
    return float(db(s1 / s2))


def wigner_origin(eta_total: float) -> float:
    """2 pi W(0, 0) of a single photon after loss ``1 - eta_total``."""
    if not 0 <= eta_total <= 1:
        raise DomainError(f"eta_total must be in [0, 1], got {eta_total!r}")
    return 1 - 2 * eta_total


def wigner_enhancement(eta0: float, snr1: float, snr2: float) -> float:
    """Deepening of the origin negativity, ``2 pi [W(snr1) - W(snr2)]``."""
    return (wigner_origin(efficiency_from_snr(snr1) * eta0)
            - wigner_origin(efficiency_from_snr(snr2) * eta0))


def histogram(series, bins: int = 101, range_=None) -> tuple[np.ndarray, np.ndarray]:
    """Bin centres and counts scaled to a peak of 1."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    counts, edges = np.histogram(x, bins=bins, range=range_)
    peak = counts.max()
    return (edges[:-1] + edges[1:]) / 2, counts / peak if peak else counts.astype(float)


def analyze(vac: TraceSet, sq: TraceSet, asq: TraceSet, w: WeightVector, f_s: float | None,
            J_block: int | None, snr_new: float | None = None) -> tuple[SqueezingReport, dict]:
    """Full chain: weights, optional sidebands, vacuum normalization, inversion."""
    series = {}
    for name, ts in (("vac", vac), ("sq", sq), ("asq", asq)):
        s = apply_weight(ts, w)
        if f_s is not None:
            s = sideband(s, f_s, J_block)
        series[name] = s
    lv = squeezing_levels(series["sq"], series["asq"], series["vac"])
    eta = r = es = rs = None
    try:
        eta, r = infer_eta_r(lv["S_sq"], lv["S_asq"])
        c = lv["counts"]
        es, rs = eta_r_sigma(lv["S_sq"], lv["S_asq"], c["sq"], c["asq"], c["vac"])
    except DomainError:
        pass
    predicted = None
    snr = w.achieved_snr
    if snr_new is not None and snr is not None and eta is not None:
        ps, pa = predict_improved(lv["S_sq"], lv["S_asq"], snr, snr_new)
        predicted = {"snr_new": snr_new, "snr_new_db": float(db(snr_new)), "S_sq": ps, "S_asq": pa,
                     "S_sq_db": float(db(ps)), "S_asq_db": float(db(pa))}
    rep = SqueezingReport(lv["S_sq"], lv["S_asq"], eta, r, snr, max(lv["ci_sq_db"], lv["ci_asq_db"]),
                          es, rs, lv["counts"], predicted)
    return rep, series
