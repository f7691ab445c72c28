import numpy as np
import pytest

from conftest import random_spd, sphere_search_max
from uhdopt.circuit import DerivedParams, impulse_response
from uhdopt.errors import ConditioningError, DomainError, ShapeError
from uhdopt.kernels import (KernelMatrix, add, build_R_crosstalk, Role, SamplingGrid, centered_delay, db, eig_decompose,
                            snr_of_weight, window_response)
from uhdopt.optimize import (constant_weight, crosstalk_coeffs, fourier_basis, optimize_weight,
                             peak_weight, snr_vs_cutoff)


def test_basis_n0_constant():
    U = fourier_basis(125, 0).U
    assert U.shape == (125, 1)
    assert np.allclose(U, np.sqrt(1 / 125), rtol=0, atol=1e-15)


def test_basis_gram_identity():
    U = fourier_basis(125, 3).U
    assert U.shape == (125, 7)
    assert np.max(np.abs(U.T @ U - np.eye(7))) <= 1e-12


@pytest.mark.parametrize("L,N", [(10, 2), (31, 7), (125, 12), (64, 31)])
def test_basis_against_direct_summation(L, N):
    U = fourier_basis(L, N).U
    G = np.empty((2 * N + 1, 2 * N + 1))
    l = np.arange(L)

    def col(n):
        if n == 0:
            return np.full(L, np.sqrt(1 / L))
        if n % 2:
            return np.sqrt(2 / L) * np.sin((n + 1) * np.pi * l / L)
        return np.sqrt(2 / L) * np.cos(n * np.pi * l / L)

    for a in range(2 * N + 1):
        for b in range(2 * N + 1):
            G[a, b] = sum(col(a)[i] * col(b)[i] for i in range(L))
    assert np.allclose(U.T @ U, G, rtol=0, atol=1e-12)
    assert np.max(np.abs(G - np.eye(2 * N + 1))) <= 1e-12


def test_basis_domain():
    with pytest.raises(DomainError):
        fourier_basis(10, 5)


def test_n0_is_constant_weight(model):
    S, E, _ = model["set2"]
    w = optimize_weight(S, E, 0)
    c = constant_weight(125)
    assert np.allclose(w.values, c.values, atol=1e-12)
    assert w.achieved_snr == pytest.approx(snr_of_weight(c, S, E), rel=1e-9)
    assert db(w.achieved_snr) == pytest.approx(9.9, abs=0.3)


@pytest.mark.parametrize("name,want3,want7", [("set1", 16.6, 16.9), ("set2", 13.9, 14.3),
                                              ("set3", 12.4, 12.7)])
def test_model_optima_per_preset(model, name, want3, want7):
    S, E, _ = model[name]
    w3, w7 = optimize_weight(S, E, 3), optimize_weight(S, E, 7)
    assert w3.f_c == pytest.approx(240e6)
    assert w7.f_c == pytest.approx(560e6)
    assert db(w3.achieved_snr) == pytest.approx(want3, abs=0.3)
    assert db(w7.achieved_snr) == pytest.approx(want7, abs=0.3)


def test_invariants_on_model(model):
    S, E, _ = model["set3"]
    for N in (1, 3, 7, 12):
        w = optimize_weight(S, E, N)
        U = fourier_basis(125, N).U
        assert np.linalg.norm(w.values) == pytest.approx(1, abs=1e-12)
        assert np.linalg.norm(w.values - U @ (U.T @ w.values)) <= 1e-9
        assert snr_of_weight(w, S, E) == pytest.approx(w.achieved_snr, rel=1e-9)
        x = U.T @ w.values
        St, Et = U.T @ S.values @ U, U.T @ E.values @ U
        res = np.linalg.norm(St @ x - w.achieved_snr * Et @ x)
        assert res <= 1e-8 * np.linalg.norm(St, 2) * np.linalg.norm(x)
        lead = eig_decompose(S.values - E.values, tol=1e-9)[1][:, 0]
        assert w.values @ lead >= 0


def test_scale_invariance(model):
    S, E, _ = model["set1"]
    w = optimize_weight(S, E, 5)
    for cs, ce in ((3.0, 1.0), (1.0, 7.0), (1e-6, 1e-6)):
        v = optimize_weight(S.values * cs, E.values * ce, 5)
        assert abs(v.values @ w.values) >= 1 - 1e-9
        assert v.achieved_snr == pytest.approx(w.achieved_snr * cs / ce, rel=1e-8)


def test_snr_vs_cutoff_monotone(model):
    S, E, _ = model["set1"]
    rows = snr_vs_cutoff(S, E, 12)
    snrs = [r[2] for r in rows]
    assert all(b >= a - 1e-9 for a, b in zip(snrs, snrs[1:]))
    assert [r[0] for r in rows] == list(range(13))
    assert rows[12][1] == pytest.approx(960e6)


def test_white_noise_matched_filter(dps, grid):
    rho = impulse_response(dps["set1"], grid.times - centered_delay(dps["set1"], grid.T))
    S = np.eye(125) + np.outer(rho, rho) / (rho @ rho) * 30
    w = optimize_weight(S, np.eye(125), 40)
    assert w.values @ rho / np.linalg.norm(rho) >= 0.999


def test_extra_basis_vectors_do_not_help_ideal_model(rng):
    U = fourier_basis(125, 4).U
    rho = U @ rng.standard_normal(9)
    S = np.eye(125) + np.outer(rho, rho)
    a = optimize_weight(S, np.eye(125), 4).achieved_snr
    b = optimize_weight(S, np.eye(125), 20).achieved_snr
    assert abs(db(b) - db(a)) <= 0.01


def test_random_spd_pair_vs_sphere_search(rng):
    L, N = 6, 2
    S, E = random_spd(rng, L, 50), random_spd(rng, L, 50)
    w = optimize_weight(S, E, N)
    U = fourier_basis(L, N).U
    found = sphere_search_max(U.T @ S @ U, U.T @ E @ U, rng)
    assert found <= w.achieved_snr * (1 + 1e-12)
    assert found >= w.achieved_snr * (1 - 0.005)


def test_conditioning_error():
    with pytest.raises(ConditioningError, match="smallest eigenvalue"):
        optimize_weight(np.eye(8), -np.eye(8), 2)


def test_shape_error():
    with pytest.raises(ShapeError):
        optimize_weight(np.eye(8), np.eye(9), 2)


def test_constant_weight():
    assert np.allclose(constant_weight(4).values, 0.5)


def test_peak_weight(model):
    R = model["set1"][2]
    w = peak_weight(R, 0.5e-9)
    nz = w.values[w.values != 0]
    assert len(nz) == 5 and np.allclose(nz, 1 / np.sqrt(5))
    centre = int(np.argmax(np.diag(R.values)))
    assert w.values[centre] > 0
    assert np.allclose(peak_weight(R, 12.5e-9).values, constant_weight(125).values)
    one = peak_weight(R, 0.1e-9)
    assert np.count_nonzero(one.values) == 1
    with pytest.raises(DomainError):
        peak_weight(R, 0.05e-9)


def test_peak_weight_near_edge():
    g = SamplingGrid(10, 1.0)
    R = KernelMatrix(Role.RESPONSE, g, np.diag(np.r_[np.zeros(9), 1.0]))
    w = peak_weight(R, 0.4)
    assert np.count_nonzero(w.values) == 4 and w.values[-1] > 0


def test_crosstalk_negligible_for_fast_detector(grid):
    dp = DerivedParams(C_t=1e-11, f0=2e9, p=2.5, n_c=1e-16, n_f=1e-16, R_f=1e3, eta_PD=0.9)
    c = crosstalk_coeffs(constant_weight(125), dp, grid, 2)
    for d in (-2, -1, 1, 2):
        assert abs(c[d]) <= 0.01 * abs(c[0])


def test_crosstalk_set3_constant_worse_than_optimal(model, dps, grid, lo):
    E = model["set3"][1]
    dp = dps["set3"]
    # a later arrival leaves a visible tail in the next window
    delay = 8e-9
    S = add(E, build_R_crosstalk(dp, grid, lo, 1, delay))
    const = crosstalk_coeffs(constant_weight(125), dp, grid, 1, delay)
    opt = crosstalk_coeffs(optimize_weight(S, E, 7), dp, grid, 1, delay)
    assert abs(const[1] / const[0]) > abs(opt[1] / opt[0])


def test_crosstalk_definition(dps, grid):
    dp = dps["set2"]
    w = np.random.default_rng(1).standard_normal(125)
    c = crosstalk_coeffs(w, dp, grid, 1)
    d0 = centered_delay(dp, grid.T)
    expect = sum(w[l] * impulse_response(dp, grid.times[l] + grid.T - d0) for l in range(125)) * grid.dt
    assert c[1] == pytest.approx(expect, rel=1e-12)
    assert c[-1] == 0.0  # causal: a later pulse cannot reach an earlier window
    assert all(v == 0 for v in crosstalk_coeffs(np.zeros(125), dp, grid, 3).values())
    assert c[0] == pytest.approx(w @ window_response(dp, grid, periodic=False) * grid.dt, rel=1e-12)
