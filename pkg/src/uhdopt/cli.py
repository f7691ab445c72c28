"""Command-line front end.

Subcommands::

    simulate   config -> trace file (.uhdt) + sidecar
    estimate   dark [vacuum] traces -> E [S, R] kernel files
    optimize   S and E kernels (or a model preset) -> weight files / SNR sweep
    analyze    vacuum, squeezed, anti-squeezed traces + weight -> report
    reproduce  table-s1 | appendix-snr | fig2

Exit codes: 0 success, 2 validation, 3 numerical, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .circuit import PRESET_TABLE, PRESETS, CircuitParams, LOConfig, derive_params, preset
from .errors import ConfigError, FormatError, UHDError
from .estimate import estimate_kernel, offset_correct
from .io import (TRACE_VERSION, read_kernel, read_trace, read_weight, sha256_file, write_json,
                 write_kernel, write_table_csv, write_trace, write_weight)
from .kernels import (DecayWarning, Role, SamplingGrid, add, build_E, build_R, db, from_db, snr_of_weight,
                      subtract)
from .optimize import constant_weight, optimize_weight, peak_weight, snr_vs_cutoff
from .pipeline import analyze, corr_d, histogram, squeezing_enhancement, stats
from .resample import ResampleConfig, align, estimate_drift
from .synth import StateSpec, synth_quadratures, synth_trace

_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "circuit": {"oneOf": [
            {"type": "string", "enum": sorted(PRESETS)},
            {"type": "object", "additionalProperties": False,
             "required": ["R_f", "C_f", "C_p"],
             "properties": {"preset": {"type": "string", "enum": sorted(PRESETS)},
                            "R_f": _POS, "C_f": _POS, "C_p": _POS, "C_a": _POS, "GBW": _POS,
                            "i_n": _POS, "e_n": _POS, "T_e": _POS,
                            "eta_PD": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}}},
        ]},
        "lo": {"type": "object", "additionalProperties": False,
               "properties": {"P_LO": {"type": "number", "minimum": 0},
                              "wavelength": _POS, "T": _POS}},
        "grid": {"type": "object", "additionalProperties": False,
                 "properties": {"L": {"type": "integer", "minimum": 2}, "T": _POS}},
        "state": {"type": "object", "additionalProperties": False,
                  "properties": {"kind": {"enum": ["vacuum", "squeezed"]},
                                 "r": {"type": "number", "minimum": 0},
                                 "eta0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                                 "phase": {"enum": ["squeezing", "anti-squeezing"]}}},
        "J": {"type": "integer", "minimum": 1},
        "drift": {"type": "number"},
        "delay": {"type": "number"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "electronic": {"type": "boolean"},
        "resample": {"type": "object", "additionalProperties": False,
                     "properties": {"up_factor": {"type": "integer"},
                                    "filter_half_len": {"type": "integer"},
                                    "stopband_atten": {"type": "number"},
                                    "cutoff": {"type": "number"}}},
    },
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        # oneOf failures carry the most specific cause in their context
        if e.context:
            e = max(e.context, key=lambda c: len(c.absolute_path))
        raise ConfigError(".".join(str(p) for p in e.absolute_path) or "<root>", e.message)


def resolve(cfg: dict, args) -> dict:
    """Fill defaults; the result is the full record of a simulation run."""
    c = cfg.get("circuit", "set1")
    if getattr(args, "preset", None):
        c = args.preset
    if isinstance(c, str):
        cp = preset(c)
    else:
        c = dict(c)
        base = c.pop("preset", None)
        cp = CircuitParams.from_dict({**(preset(base).to_dict() if base else {}), **c})
    lo = LOConfig(**cfg.get("lo", {}))
    g = cfg.get("grid", {})
    grid = SamplingGrid(g.get("L", 125), g.get("T", lo.T))
    if grid.T != lo.T:
        raise ConfigError("grid.T", f"must equal lo.T ({lo.T})")
    state = StateSpec(**cfg.get("state", {}))
    seed = args.seed if getattr(args, "seed", None) is not None else cfg.get("seed", 0)
    drift = args.drift if getattr(args, "drift", None) is not None else cfg.get("drift", 0.0)
    return {"circuit": cp, "lo": lo, "grid": grid, "state": state, "J": cfg.get("J", 1000),
            "drift": float(drift), "seed": int(seed), "delay": cfg.get("delay"),
            "electronic": cfg.get("electronic", True),
            "resample": ResampleConfig(**cfg.get("resample", {}))}


def _manifest(out: Path, command: str, params: dict, inputs=(), outputs=(), tag=None) -> dict:
    m = {"command": command, "version": __version__, "trace_format_version": TRACE_VERSION,
         "parameters": params,
         "inputs": {str(p): sha256_file(p) for p in inputs},
         "outputs": {Path(p).name: sha256_file(p) for p in outputs}}
    write_json(m, out / f"manifest_{command}{'_' + tag if tag else ''}.json")
    return m


def _out(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


# --- commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    r = resolve(cfg, args)
    out = _out(args)
    dp = derive_params(r["circuit"])
    X = synth_quadratures(r["state"], r["J"], r["seed"])
    ts = synth_trace(dp, r["grid"], r["lo"], X, r["drift"], r["seed"], delay=r["delay"],
                     electronic=r["electronic"], circuit=r["circuit"], state=r["state"])
    path = write_trace(ts, out / f"{args.name}.uhdt")
    params = {"circuit": r["circuit"].to_dict(), "lo": vars(r["lo"]), "grid": r["grid"].to_dict(),
              "state": r["state"].to_dict(), "J": r["J"], "drift": r["drift"], "seed": r["seed"],
              "delay": ts.truth["delay"], "electronic": r["electronic"]}
    outputs = [path, path.with_suffix(".json"), path.with_suffix(".quad.bin")]
    m = _manifest(out, "simulate", params, [args.config] if args.config else [], outputs,
                  tag=args.name)
    print(json.dumps(m, indent=2, sort_keys=True))
    return 0


def _prepare(path, drift, do_align, cfg):
    ts = read_trace(path)
    if drift is None and do_align:
        drift = estimate_drift(ts)
    if drift:
        ts = align(ts, drift, cfg)
    return offset_correct(ts), drift


def cmd_estimate(args) -> int:
    out = _out(args)
    cfg = ResampleConfig(**(load_config(args.config).get("resample", {}) if args.config else {}))
    fmt = "csv" if args.format == "csv" else "bin"
    written, notes = [], {}
    kernels = {}
    for path, role in ((args.dark, Role.ELECTRONIC), (args.vacuum, Role.SHOT)):
        if path is None:
            continue
        ts, drift = _prepare(path, args.drift, args.align, cfg)
        lo = ts.truth.get("lo", {})
        if role is Role.ELECTRONIC and lo.get("P_LO", 0) > 0:
            notes["E"] = "dark trace sidecar reports a nonzero LO power"
        kernels[role] = estimate_kernel(ts, role)
        notes.setdefault("drift", {})[str(path)] = drift
    if Role.ELECTRONIC in kernels:
        written.append(write_kernel(kernels[Role.ELECTRONIC], out / "E", fmt))
    if Role.SHOT in kernels:
        written.append(write_kernel(kernels[Role.SHOT], out / "S", fmt))
        if Role.ELECTRONIC in kernels:
            R = subtract(kernels[Role.SHOT], kernels[Role.ELECTRONIC])
            written.append(write_kernel(R, out / "R", fmt))
    outputs = written + [p.with_suffix(".json") for p in written]
    inputs = [p for p in (args.dark, args.vacuum) if p]
    _manifest(out, "estimate", {"format": fmt, "align": args.align, **notes}, inputs, outputs)
    for p in written:
        print(p)
    return 0


def _parse_sweep(s: str) -> range:
    try:
        a, b = s.split("..")
        return range(int(a), int(b) + 1)
    except ValueError:
        raise ConfigError("--sweep", f"expected 'A..B', got {s!r}") from None


def _model_kernels(name: str, grid=SamplingGrid(), lo=LOConfig()):
    dp = derive_params(preset(name))
    E = build_E(dp, grid)
    with warnings.catch_warnings():
        # the folded response is the intended model even when tails spill over
        warnings.simplefilter("ignore", DecayWarning)
        R = build_R(dp, grid, lo)
    return add(E, R), E


def cmd_optimize(args) -> int:
    out = _out(args)
    if args.preset:
        S, E = _model_kernels(args.preset)
        inputs = []
    elif args.S and args.E:
        S, E = read_kernel(args.S), read_kernel(args.E)
        inputs = [args.S, args.E]
    else:
        raise ConfigError("optimize", "give --preset or both --S and --E")
    written = []
    params = {"preset": args.preset, "ridge": args.ridge}
    if args.sweep:
        rng = _parse_sweep(args.sweep)
        rows = snr_vs_cutoff(S, E, rng.stop - 1, args.ridge, T=S.grid.T)
        table = [(n, fc, snr, float(db(snr))) for n, fc, snr, _ in rows if n >= rng.start]
        header = ["N", "f_c", "snr", "snr_db"]
        if args.format == "json":
            p = write_json([dict(zip(header, t)) for t in table], out / "sweep.json")
        else:
            p = write_table_csv(out / "sweep.csv", header, table)
            gp = out / "sweep.gp"
            gp.write_text("set datafile separator ','\nset xlabel 'cutoff frequency (MHz)'\n"
                          "set ylabel 'SNR (dB)'\nplot 'sweep.csv' every ::1 using ($2/1e6):4 "
                          "with linespoints title 'optimal'\n")
            written.append(gp)
        written.append(p)
        for n, fc, snr, sdb in table:
            print(f"N={n:3d}  f_c={fc / 1e6:8.1f} MHz  SNR={sdb:7.3f} dB")
        params["sweep"] = args.sweep
    else:
        if args.method == "optimal":
            w = optimize_weight(S, E, args.N, args.ridge)
        elif args.method == "constant":
            w = constant_weight(S.grid.L).evaluated(S, E)
        else:
            w = peak_weight(subtract(S, E), args.width).evaluated(S, E)
        p = write_weight(w, out / f"weight_{w.method}")
        written += [p, p.with_suffix(".json")]
        print(f"{w.method}: SNR = {db(w.achieved_snr):.3f} dB")
        params.update(method=args.method, N=args.N, width=args.width)
    _manifest(out, "optimize", params, inputs, written)
    return 0


def cmd_analyze(args) -> int:
    out = _out(args)
    cfg = ResampleConfig(**(load_config(args.config).get("resample", {}) if args.config else {}))
    w = read_weight(args.weight)
    traces = {}
    for key in ("vacuum", "squeezed", "anti_squeezed"):
        traces[key], _ = _prepare(getattr(args, key), args.drift, args.align, cfg)
    snr_new = from_db(args.snr_new_db) if args.snr_new_db is not None else None
    rep, series = analyze(traces["vacuum"], traces["squeezed"], traces["anti_squeezed"], w,
                          args.fs, args.block, snr_new)
    d = rep.to_dict()
    d["series_stats"] = {}
    for name, s in series.items():
        var, chi, kappa = stats(s)
        d["series_stats"][name] = {"variance": var, "skewness": chi, "excess_kurtosis": kappa,
                                   "corr_1": corr_d(s, 1) if len(s) > 2 else None, "count": len(s)}
    vac_std = np.sqrt(series["vac"].variance)
    lim = 5 * max(np.sqrt(series[k].variance) for k in series) / vac_std
    cols = []
    for name in ("vac", "sq", "asq"):
        c, h = histogram(series[name].values / vac_std, args.bins, (-lim, lim))
        cols.append(h)
    hist = write_table_csv(out / "histogram.csv", ["x", "vacuum", "squeezed", "anti_squeezed"],
                           zip(c, *cols))
    gp = out / "histogram.gp"
    gp.write_text("set datafile separator ','\nset xlabel 'normalized quadrature'\n"
                  "plot for [i=2:4] 'histogram.csv' every ::1 using 1:i with lines title columnhead(i)\n")
    rp = write_json(d, out / "report.json")
    tp = out / "report.txt"
    tp.write_text(rep.table() + "\n")
    inputs = [args.vacuum, args.squeezed, args.anti_squeezed, args.weight]
    _manifest(out, "analyze", {"f_s": args.fs, "J_block": args.block, "drift": args.drift,
                               "align": args.align, "snr_new_db": args.snr_new_db},
              inputs, [rp, tp, hist, gp])
    print(rep.table())
    return 0


def _check(rows):
    ok = True
    for name, got, want, tol in rows:
        passed = abs(got - want) <= tol
        ok &= passed
        print(f"{name:<34}{got:>10.4f}{want:>10.4f}   +/-{tol:<8g}{'PASS' if passed else 'FAIL'}")
    return ok


def cmd_reproduce(args) -> int:
    print(f"{'quantity':<34}{'computed':>10}{'published':>10}   tolerance")
    rows = []
    if args.target == "table-s1":
        for name, (f0, p) in PRESET_TABLE.items():
            dp = derive_params(PRESETS[name])
            rows.append((f"{name} f0 (MHz)", dp.f0 / 1e6, f0, 0.005 * f0))
            rows.append((f"{name} p", dp.p, p, 0.005 * p))
    elif args.target == "appendix-snr":
        published = {"set1": (13.8, 16.6, 16.9), "set2": (9.9, 13.9, 14.3), "set3": (8.3, 12.4, 12.7)}
        for name, want in published.items():
            S, E = _model_kernels(name)
            got = (db(snr_of_weight(constant_weight(S.grid.L), S, E)),
                   db(optimize_weight(S, E, 3).achieved_snr),
                   db(optimize_weight(S, E, 7).achieved_snr))
            for label, g, w_ in zip(("constant", "f_c = 240 MHz", "f_c = 560 MHz"), got, want):
                rows.append((f"{name} {label} (dB)", float(g), w_, 0.3))
    else:
        s13, s18 = from_db(13.0), from_db(18.0)
        for r, v in zip((0.5, 1.0, 2.7), (0.23, 0.68, 2.46)):
            rows.append((f"r={r} eta0=0.976 (dB)", squeezing_enhancement(r, 0.976, s13, s18), v, 0.01))
        for e, v in zip((0.7, 0.9, 0.976), (0.32, 1.00, 2.46)):
            rows.append((f"r=2.7 eta0={e} (dB)", squeezing_enhancement(2.7, e, s13, s18), v, 0.01))
    return 0 if _check(rows) else 1


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="RNG seed (u64), overrides the config")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--format", choices=("csv", "json", "bin"), default=None,
                        help="output format where a command supports several")

    ap = argparse.ArgumentParser(prog="uhdopt", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="synthesize a detector trace")
    p.add_argument("--preset", choices=sorted(PRESETS), help="circuit preset, overrides the config")
    p.add_argument("--drift", type=float, help="sampling drift per period (s)")
    p.add_argument("--name", default="trace", help="output file stem (default: trace)")
    p.set_defaults(func=cmd_simulate)

    align_opts = argparse.ArgumentParser(add_help=False)
    align_opts.add_argument("--drift", type=float, help="align with this drift per period (s)")
    align_opts.add_argument("--align", action="store_true",
                            help="estimate the drift from each trace and align before use")

    p = sub.add_parser("estimate", parents=[common, align_opts], help="estimate kernels from traces")
    p.add_argument("--dark", help="trace recorded with the LO off (electronic kernel)")
    p.add_argument("--vacuum", help="vacuum-input trace (shot-noise kernel)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("optimize", parents=[common], help="compute weight vectors")
    p.add_argument("--S", help="shot-noise kernel file")
    p.add_argument("--E", help="electronic kernel file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="use model kernels of a preset")
    p.add_argument("-N", type=int, default=3, help="cutoff order, f_c = N/T (default: 3)")
    p.add_argument("--sweep", help="cutoff orders A..B; writes an SNR table")
    p.add_argument("--method", choices=("optimal", "constant", "peak"), default="optimal")
    p.add_argument("--width", type=float, default=0.5e-9, help="peak weight width (s)")
    p.add_argument("--ridge", type=float, default=1e-10, help="relative ridge (default: 1e-10)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("analyze", parents=[common, align_opts], help="squeezing analysis")
    p.add_argument("--vacuum", required=True)
    p.add_argument("--squeezed", required=True)
    p.add_argument("--anti-squeezed", dest="anti_squeezed", required=True)
    p.add_argument("--weight", required=True, help="weight CSV")
    p.add_argument("--fs", type=float, help="sideband frequency (Hz); omit for per-pulse outcomes")
    p.add_argument("--block", type=int, default=640, help="outcomes per sideband value")
    p.add_argument("--snr-new-db", type=float, help="predict levels at this detector SNR (dB)")
    p.add_argument("--bins", type=int, default=101)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reproduce", help="compare model values with published ones")
    p.add_argument("target", choices=("table-s1", "appendix-snr", "fig2"))
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("UHD_THREADS")
    try:
        limit = int(threads) if threads else None
        if limit is not None and limit < 1:
            raise ValueError
    except ValueError:
        print(f"error: UHD_THREADS must be a positive integer, got {threads!r}", file=sys.stderr)
        return 2
    try:
        with threadpool_limits(limits=limit):
            return args.func(args)
    except UHDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except jsonschema.SchemaError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
