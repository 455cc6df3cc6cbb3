"""Command-line front end.

Subcommands: design, sweep, fit, map, simulate. Exit codes: 0 success,
2 input/config error, 3 numerical failure, 4 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import beam_optics, collection, designer, mapping, pulse_fit
from .config import ConfigError, load_config
from .units import UnitError, parse_quantity

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrcfm",
                     description="Design and analysis toolkit for a "
                                 "long-Rayleigh-length confocal microscope")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config 'output' "
                             "or current directory)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for per-pixel fits")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for synthetic data generation")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("design", help="run the full design sweep and "
                                      "lens recommendation")
    p.add_argument("--config", type=Path, required=True)

    p = sub.add_parser("sweep", help="emit one sweep curve as CSV")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--variable", required=True,
                   choices=["rayleigh", "waist", "detection-proportion"])
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--min", dest="grid_min", default=None,
                   help="grid start, with unit for length variables "
                        "(e.g. '1 um')")
    p.add_argument("--max", dest="grid_max", default=None)
    p.add_argument("--cfm-focal", default="3.6 mm",
                   help="reference CFM focal length for "
                        "detection-proportion sweeps")

    p = sub.add_parser("fit", help="fit one time-series CSV")
    p.add_argument("--model", required=True, choices=["rabi", "t1", "t2"])
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--init", default=None,
                   help="comma-separated initial parameters")

    p = sub.add_parser("map", help="fit a dataset into a spatial map")
    p.add_argument("--model", required=True, choices=["rabi", "t1", "t2"])
    p.add_argument("--manifest", type=Path, required=True,
                   help="dataset manifest JSON (or its directory)")
    p.add_argument("--pitch", default=None,
                   help="pixel pitch with unit, e.g. '50 um'")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--model", required=True, choices=["rabi", "t1", "t2"])
    p.add_argument("--truth", type=Path, required=True,
                   help="truth-field JSON file")
    p.add_argument("--noise", type=float, default=0.0,
                   help="additive Gaussian noise sigma, signal units")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    handler = {
        "design": cmd_design,
        "sweep": cmd_sweep,
        "fit": cmd_fit,
        "map": cmd_map,
        "simulate": cmd_simulate,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, UnitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _out_dir(args, cfg=None) -> Path:
    out = args.out
    if out is None and cfg is not None and cfg.output is not None:
        out = cfg.output
    out = Path(out) if out is not None else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    spec = designer.SweepSpec("rayleigh_length", cfg.sweep_grid(),
                              cfg.sweep_context())
    rows = designer.sweep(spec)
    designer.write_sweep_csv(rows, out / "sweep.csv")
    opt = designer.optimal_rayleigh(spec)
    focal = beam_optics.focal_length_for_rayleigh(
        opt.rayleigh_length, cfg.incident_beam_diameter, cfg.wavelength)
    catalog = cfg.catalog if cfg.catalog is not None else designer.default_catalog()
    choice = designer.recommend_lens(catalog, spec)
    report = {
        "optimal_rayleigh_length_m": opt.rayleigh_length,
        "twice_optimal_rayleigh_length_m": 2.0 * opt.rayleigh_length,
        "detected_signal_at_optimum": opt.detected_signal,
        "unimodal": opt.unimodal,
        "unconstrained_focal_length_m": focal,
        "recommended_lens": {
            "name": choice.name,
            "focal_length_m": choice.focal_length,
            "detected_signal": choice.detected_signal,
            "waist_radius_m": choice.waist_radius,
            "rayleigh_length_m": choice.rayleigh_length,
            "spot_diameter_m": 2.0 * choice.waist_radius,
        },
    }
    if cfg.fiber_core_diameter and cfg.fiber_magnification:
        report["fiber_detection_proportion"] = collection.detection_proportion(
            cfg.fiber_core_diameter / 2.0, cfg.fiber_magnification,
            choice.waist_radius)
    (out / "design_report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"optimal z_R = {opt.rayleigh_length * 1e6:.1f} um "
          f"(2 z_R = {2 * opt.rayleigh_length * 1e6:.1f} um), "
          f"F* = {focal * 1e3:.2f} mm, "
          f"recommended lens: {choice.name}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    if args.variable == "detection-proportion":
        lo = float(args.grid_min) if args.grid_min else 1e-6
        hi = float(args.grid_max) if args.grid_max else 1.0
        n = args.points or cfg.sweep_points
        cfm_focal = parse_quantity(args.cfm_focal, "length")
        spec = designer.SweepSpec("rayleigh_length", cfg.sweep_grid(),
                                  cfg.sweep_context())
        table = designer.cfm_comparison(spec, cfm_focal,
                                        np.geomspace(lo, hi, n))
        lines = ["proportion,lrcfm_cfm_ratio"]
        lines += [f"{repr(float(p))},{repr(float(r))}" for p, r in table]
        path = out / "cfm_comparison.csv"
        _atomic_write(path, "\n".join(lines) + "\n")
        print(f"wrote {path}")
        return EXIT_OK
    variable = {"rayleigh": "rayleigh_length", "waist": "waist_radius"}[
        args.variable]
    lo = parse_quantity(args.grid_min, "length") if args.grid_min else cfg.sweep_min
    hi = parse_quantity(args.grid_max, "length") if args.grid_max else cfg.sweep_max
    n = args.points or cfg.sweep_points
    grid = designer.default_grid(lo, hi, n)
    spec = designer.SweepSpec(variable, grid, cfg.sweep_context())
    rows = designer.sweep(spec)
    path = out / "sweep.csv"
    designer.write_sweep_csv(rows, path)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = pulse_fit.TimeSeries.from_csv(args.input)
    init = None
    if args.init is not None:
        init = np.array([float(v) for v in args.init.split(",")])
    result = pulse_fit.fit(args.model, data, init=init)
    out = _out_dir(args)
    path = out / f"fit_{args.model}.json"
    pulse_fit.write_fit_json(result, path)
    params = ", ".join(f"a{i + 1}={p:.6g}"
                       for i, p in enumerate(result.params))
    print(f"{args.model}: converged={result.converged} "
          f"iterations={result.iterations} {params}")
    if not result.converged:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_map(args) -> int:
    manifest_path = args.manifest
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    records = []
    for pixel in manifest["pixels"]:
        series = pulse_fit.TimeSeries.from_csv(base / pixel["file"])
        records.append((pixel["x_um"] * 1e-6, pixel["y_um"] * 1e-6, series))
    pitch = None
    if args.pitch is not None:
        pitch = parse_quantity(args.pitch, "length")
    elif "pitch_um" in manifest:
        pitch = manifest["pitch_um"] * 1e-6
    pixel_map = mapping.assemble(records, args.model, pitch=pitch)
    try:
        map_stats = mapping.stats(pixel_map)
    except ValueError:
        print("numerical failure: no valid pixels", file=sys.stderr)
        return EXIT_NUMERICAL
    out = _out_dir(args)
    mapping.write_map_csv(pixel_map, out / "map.csv")
    mapping.write_stats_json(map_stats, out / "stats.json")
    (out / "map.json").write_text(
        json.dumps(mapping.map_to_json_dict(pixel_map), indent=2) + "\n")
    print(f"map {pixel_map.nx}x{pixel_map.ny}: mean={map_stats.mean:.6g} "
          f"{pixel_map.units}, valid={map_stats.n_valid}, "
          f"missing={map_stats.n_missing}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    truth = json.loads(args.truth.read_text())
    model = truth.get("model", args.model)
    if model != args.model:
        raise ConfigError(f"truth file is for model {model!r}, "
                          f"--model says {args.model!r}")
    arity = pulse_fit.MODEL_ARITY[args.model]
    nx, ny = int(truth["nx"]), int(truth["ny"])
    params = np.asarray(truth["params"], dtype=float)
    if params.shape == (arity,):
        params = np.broadcast_to(params, (ny, nx, arity)).copy()
    elif params.shape != (ny, nx, arity):
        raise ConfigError(f"truth params must have shape ({ny}, {nx}, "
                          f"{arity}) or ({arity},), got {params.shape}")
    if "tau_s" in truth:
        tau = np.asarray(truth["tau_s"], dtype=float)
    else:
        spec = truth["tau"]
        tau = np.linspace(float(spec["start_s"]), float(spec["stop_s"]),
                          int(spec["points"]))
    origin = tuple(1e-6 * v for v in truth.get("origin_um", (0.0, 0.0)))
    pitch = 1e-6 * float(truth.get("pitch_um", 50.0))
    records = mapping.synth_map(params, args.model, tau, args.noise,
                                args.seed, origin=origin, pitch=pitch)
    out = _out_dir(args)
    pixels = []
    for x, y, series in records:
        ix = int(round((x - origin[0]) / pitch))
        iy = int(round((y - origin[1]) / pitch))
        name = f"pixel_{iy:03d}_{ix:03d}.csv"
        series.to_csv(out / name)
        pixels.append({"x_um": x * 1e6, "y_um": y * 1e6, "file": name})
    manifest = {"model": args.model, "pitch_um": pitch * 1e6,
                "noise_sigma": args.noise, "seed": args.seed,
                "pixels": pixels}
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(pixels)} pixel files to {out}")
    return EXIT_OK


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


if __name__ == "__main__":
    sys.exit(main())
