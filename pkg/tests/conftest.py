import warnings

import numpy as np
import pytest

from uhdopt.circuit import LOConfig, derive_params, preset
from uhdopt.kernels import DecayWarning, SamplingGrid, add, build_E, build_R

GRID = SamplingGrid()
LO = LOConfig()


@pytest.fixture(scope="session")
def grid():
    return GRID


@pytest.fixture(scope="session")
def lo():
    return LO


@pytest.fixture(scope="session")
def dps():
    return {n: derive_params(preset(n)) for n in ("set1", "set2", "set3")}


@pytest.fixture(scope="session")
def model(dps):
    """Model (S, E, R) per preset on the default grid."""
    out = {}
    for name, dp in dps.items():
        E = build_E(dp, GRID)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DecayWarning)
            R = build_R(dp, GRID, LO)
        out[name] = (add(E, R), E, R)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, n, cond=1e3):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.geomspace(1, cond, n) if n > 1 else np.ones(1)
    return (Q * rng.permutation(lam)) @ Q.T


def sphere_search_max(A, B, rng, n_samples=1_000_000, rounds=10):
    """Largest ``x^T A x / x^T B x`` found by sampling the unit sphere.

    Half the budget is uniform directions; the rest refines the best point
    found with random perturbations of shrinking size.  Uses no
    eigen-decomposition, so it is an independent check of the solver.
    """
    n = A.shape[0]

    def q(X):
        return np.einsum("ij,jk,ik->i", X, A, X) / np.einsum("ij,jk,ik->i", X, B, X)

    half = n_samples // 2
    best_val, best = -np.inf, None
    for s in range(0, half, 100_000):
        X = rng.standard_normal((min(100_000, half - s), n))
        v = q(X)
        i = int(np.argmax(v))
        if v[i] > best_val:
            best_val, best = v[i], X[i] / np.linalg.norm(X[i])
    per = (n_samples - half) // rounds
    scale = 0.3
    for _ in range(rounds):
        X = best + scale * rng.standard_normal((per, n))
        v = q(X)
        i = int(np.argmax(v))
        if v[i] > best_val:
            best_val, best = v[i], X[i] / np.linalg.norm(X[i])
        scale /= 2
    return float(best_val)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion that ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(results):
        passed, detail = results[i]
        terminalreporter.write_line(f"criterion {i:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
