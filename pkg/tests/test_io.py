import numpy as np
import pytest

from uhdopt.errors import FormatError
from uhdopt.io import (TRACE_MAGIC, read_kernel, read_trace, read_weight, sha256_file,
                       write_kernel, write_trace, write_weight)
from uhdopt.kernels import Provenance, build_E
from uhdopt.optimize import optimize_weight
from uhdopt.synth import StateSpec, synth_quadratures, synth_trace


@pytest.fixture
def trace(dps, grid, lo):
    X = synth_quadratures(StateSpec.vacuum(), 20, 4)
    return synth_trace(dps["set2"], grid, lo, X, seed=4, state=StateSpec.vacuum())


def test_trace_round_trip(trace, tmp_path):
    p = write_trace(trace, tmp_path / "a.uhdt")
    back = read_trace(p)
    assert np.array_equal(back.samples, trace.samples)
    assert np.array_equal(back.quadratures, trace.quadratures)
    assert back.grid == trace.grid and back.seed == 4
    assert back.truth["state"]["kind"] == "vacuum"
    assert p.read_bytes()[:4] == TRACE_MAGIC
    assert p.stat().st_size == 24 + 8 * 20 * 125


def test_trace_rewrite_is_byte_identical(trace, tmp_path):
    a = write_trace(trace, tmp_path / "a.uhdt")
    b = write_trace(read_trace(a), tmp_path / "b.uhdt")
    assert sha256_file(a) == sha256_file(b)


def test_trace_format_errors(trace, tmp_path):
    p = write_trace(trace, tmp_path / "a.uhdt")
    raw = p.read_bytes()
    bad = tmp_path / "bad.uhdt"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError, match="magic"):
        read_trace(bad)
    bad.write_bytes(raw[:-8])
    with pytest.raises(FormatError, match="expected"):
        read_trace(bad)
    bad.write_bytes(raw[:10])
    with pytest.raises(FormatError, match="truncated"):
        read_trace(bad)
    bad.write_bytes(raw[:4] + (99).to_bytes(4, "little") + raw[8:])
    with pytest.raises(FormatError, match="version"):
        read_trace(bad)
    with pytest.raises(FormatError):
        read_trace(tmp_path / "missing.uhdt")


@pytest.mark.parametrize("fmt", ["bin", "csv"])
def test_kernel_round_trip(dps, grid, tmp_path, fmt):
    E = build_E(dps["set1"], grid)
    p = write_kernel(E, tmp_path / "E", fmt)
    assert p.suffix == "." + fmt
    back = read_kernel(p)
    assert back.role is E.role and back.grid == E.grid
    assert np.array_equal(back.values, E.values)
    assert isinstance(back.provenance, Provenance)
    assert back.provenance.kind == E.provenance.kind


def test_kernel_size_error(dps, grid, tmp_path):
    p = write_kernel(build_E(dps["set1"], grid), tmp_path / "E")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError):
        read_kernel(p)
    with pytest.raises(FormatError):
        write_kernel(build_E(dps["set1"], grid), tmp_path / "E", "xml")


def test_weight_round_trip(model, tmp_path):
    S, E, _ = model["set1"]
    w = optimize_weight(S, E, 3)
    back = read_weight(write_weight(w, tmp_path / "w"))
    assert np.allclose(back.values, w.values, rtol=0, atol=1e-15)
    assert back.method == w.method and back.N == 3
    assert back.achieved_snr == pytest.approx(w.achieved_snr, rel=1e-15)
    (tmp_path / "junk.csv").write_text("index,value\n0,abc\n")
    with pytest.raises(FormatError):
        read_weight(tmp_path / "junk.csv")
