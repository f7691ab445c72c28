"""On-disk formats.

Traces: ``.uhdt`` binary (magic ``UHDT``, u32 version, u32 J, u32 L,
f64 sample_rate, then ``J * L`` f64 samples, all little-endian) with a
``.json`` sidecar.  Kernels: row-major f64 LE ``.bin`` with a ``.json``
sidecar, or CSV.  Weights: CSV ``index,value`` with a ``.json`` sidecar.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .kernels import KernelMatrix, Provenance, Role, SamplingGrid
from .optimize import WeightVector
from .synth import TraceSet

TRACE_MAGIC = b"UHDT"
TRACE_VERSION = 1
_HEADER = struct.Struct("<4sIIId")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"missing sidecar {path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


# --- traces ------------------------------------------------------------------

def write_trace(ts: TraceSet, path) -> Path:
    path = Path(path)
    header = _HEADER.pack(TRACE_MAGIC, TRACE_VERSION, ts.J, ts.grid.L, ts.grid.sample_rate)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ts.samples.astype("<f8").tobytes())
    meta = {"format_version": TRACE_VERSION, "seed": ts.seed, "grid": ts.grid.to_dict(),
            "truth": ts.truth}
    if ts.quadratures is not None:
        qpath = path.with_suffix(".quad.bin")
        np.asarray(ts.quadratures, dtype="<f8").tofile(qpath)
        meta["quadratures_file"] = qpath.name
    _write_json(sidecar_path(path), meta)
    return path


def read_trace(path) -> TraceSet:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, J, L, fs = _HEADER.unpack_from(raw)
    if magic != TRACE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != TRACE_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * J * L:
        raise FormatError(f"{path}: expected {J * L} samples, found {len(body) // 8}")
    samples = np.frombuffer(body, dtype="<f8").astype(float)
    meta = _read_json(sidecar_path(path)) if sidecar_path(path).exists() else {}
    T = meta.get("grid", {}).get("T", L / fs)
    grid = SamplingGrid(L, T)
    if not np.isclose(grid.sample_rate, fs, rtol=1e-12):
        raise FormatError(f"{path}: sample rate {fs} disagrees with sidecar grid")
    X = None
    if "quadratures_file" in meta:
        qpath = path.parent / meta["quadratures_file"]
        if qpath.exists():
            X = np.fromfile(qpath, dtype="<f8")
    return TraceSet(grid, samples, meta.get("seed"), meta.get("truth", {}), X)


# --- kernels -----------------------------------------------------------------

def write_kernel(K: KernelMatrix, path, fmt: str = "bin") -> Path:
    path = Path(path)
    meta = {"role": K.role.value, "grid": K.grid.to_dict(), "provenance": K.provenance.to_dict()}
    if fmt == "bin":
        path = path.with_suffix(".bin")
        with open(path, "wb") as fh:
            fh.write(np.ascontiguousarray(K.values, dtype="<f8").tobytes())
    elif fmt == "csv":
        path = path.with_suffix(".csv")
        np.savetxt(path, K.values, delimiter=",", fmt="%.17g")
    else:
        raise FormatError(f"unknown kernel format {fmt!r}")
    meta["file"] = path.name
    _write_json(sidecar_path(path), meta)
    return path


def read_kernel(path) -> KernelMatrix:
    path = Path(path)
    meta = _read_json(sidecar_path(path))
    grid = SamplingGrid(**meta["grid"])
    try:
        if path.suffix == ".csv":
            vals = np.loadtxt(path, delimiter=",", ndmin=2)
        else:
            vals = np.fromfile(path, dtype="<f8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if vals.size != grid.L**2:
        raise FormatError(f"{path}: {vals.size} values for L={grid.L}")
    return KernelMatrix(Role(meta["role"]), grid, vals.reshape(grid.L, grid.L),
                        Provenance.from_dict(meta.get("provenance", {})))


# --- weights -----------------------------------------------------------------

def write_weight(w: WeightVector, path) -> Path:
    path = Path(path).with_suffix(".csv")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "value"])
        for i, v in enumerate(w.values):
            wr.writerow([i, repr(float(v))])
    _write_json(sidecar_path(path), w.meta())
    return path


def read_weight(path) -> WeightVector:
    path = Path(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read weight {path}: {exc}") from None
    meta = _read_json(sidecar_path(path)) if sidecar_path(path).exists() else {}
    return WeightVector(data[:, 1], meta.get("method", "custom"), N=meta.get("N"),
                        f_c=meta.get("f_c"), width=meta.get("width"),
                        achieved_snr=meta.get("achieved_snr"))


def write_json(obj, path) -> Path:
    _write_json(path, obj)
    return Path(path)


def write_table_csv(path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)
    return Path(path)
