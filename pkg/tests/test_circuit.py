import json

import numpy as np
import pytest
from scipy.integrate import quad

from uhdopt.circuit import (PRESET_TABLE, CircuitParams, LOConfig, derive_params, electronic_psd,
                            impulse_response, load_circuit, lo_photon_number, peak_time, preset,
                            transfer_function)
from uhdopt.errors import ConfigError, DomainError


@pytest.mark.parametrize("name", ["set1", "set2", "set3"])
def test_presets_match_tabulated_f0_p(name):
    dp = derive_params(preset(name))
    f0, p = PRESET_TABLE[name]
    assert dp.f0 / 1e6 == pytest.approx(f0, rel=5e-3)
    assert dp.p == pytest.approx(p, rel=5e-3)


def test_derived_constants_by_hand():
    cp = preset("set1")
    C_t = 2 * 4e-12 + 1e-12 + 2e-12
    assert derive_params(cp).C_t == pytest.approx(C_t, rel=1e-15)
    f0 = np.sqrt(3.9e9 / (2 * np.pi * 3.3e3 * C_t))
    assert derive_params(cp).f0 == pytest.approx(f0, rel=1e-14)


def test_photon_number():
    # 2.7 mW x 12.5 ns at 800 nm
    n = lo_photon_number(LOConfig())
    assert n == pytest.approx(2.7e-3 * 12.5e-9 / (6.62607015e-34 * 299792458.0 / 800e-9), rel=1e-14)
    assert n == pytest.approx(1.3592e8, rel=1e-4)


@pytest.mark.parametrize("name", ["set1", "set2", "set3"])
def test_impulse_response_is_inverse_transform(name):
    dp = derive_params(preset(name))
    # DC gain: integral of r equals R_f
    area, _ = quad(lambda t: impulse_response(dp, t), 0, 200 / dp.f0, limit=500)
    assert area == pytest.approx(dp.R_f, rel=1e-8)
    # one nonzero frequency by direct quadrature
    f = 0.7 * dp.f0
    re, _ = quad(lambda t: impulse_response(dp, t) * np.cos(2 * np.pi * f * t), 0, 200 / dp.f0, limit=2000)
    im, _ = quad(lambda t: -impulse_response(dp, t) * np.sin(2 * np.pi * f * t), 0, 200 / dp.f0, limit=2000)
    H = transfer_function(dp, f)
    assert re + 1j * im == pytest.approx(H, rel=1e-6)


def test_impulse_response_causal_and_peak():
    dp = derive_params(preset("set3"))
    assert np.all(impulse_response(dp, np.linspace(-1e-9, 0, 11)) == 0)
    tp = peak_time(dp)
    t = np.linspace(0, 5 * tp, 20001)
    assert t[np.argmax(impulse_response(dp, t))] == pytest.approx(tp, abs=5 * t[1])


def test_critical_damping_branch_is_continuous():
    base = preset("set2")
    dp = derive_params(base)
    dc = type(dp)(dp.C_t, dp.f0, 2.0, dp.n_c, dp.n_f, dp.R_f, dp.eta_PD)
    t = np.linspace(0, 5e-9, 50)
    for eps in (1e-4, -1e-4):
        near = type(dp)(dp.C_t, dp.f0, 2.0 + eps, dp.n_c, dp.n_f, dp.R_f, dp.eta_PD)
        assert np.allclose(impulse_response(near, t), impulse_response(dc, t), rtol=1e-3, atol=1e-3 * dp.R_f * dp.f0)


def test_psd_limits():
    dp = derive_params(preset("set1"))
    assert electronic_psd(dp, 0.0) == pytest.approx(dp.n_c)
    f = 1e4 * dp.f0
    assert electronic_psd(dp, f) * (f / dp.f0) ** 2 == pytest.approx(dp.n_f, rel=1e-6)


def test_validation():
    with pytest.raises(DomainError):
        CircuitParams(R_f=-1, C_f=1e-12, C_p=4e-12)
    with pytest.raises(DomainError):
        CircuitParams(R_f=1e3, C_f=1e-12, C_p=4e-12, eta_PD=1.1)
    with pytest.raises(ConfigError) as ei:
        CircuitParams.from_dict({"R_f": 1e3, "C_f": 1e-12, "C_p": 0.0})
    assert ei.value.path == "circuit.C_p"
    with pytest.raises(ConfigError):
        preset("set9")


def test_json_roundtrip(tmp_path):
    cp = preset("set2", eta_PD=0.8)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cp.to_dict()))
    assert load_circuit(p) == cp
    p.write_text('"set3"')
    assert load_circuit(p) == preset("set3")
