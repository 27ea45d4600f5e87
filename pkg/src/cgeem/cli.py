"""Command-line pipeline: simulate, extract, identify, compare, fleet.

Exit codes: 0 success (or converged), 2 input error, 3 flagged
non-convergence, 4 numeric failure.  Every command writes a
``manifest.json`` into its output directory with enough information to
reproduce the run; re-running with identical inputs and seed produces
bit-identical data files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .aeromodel import AircraftConfig, load_aircraft_config
from .convergence import CvThresholds
from .errors import CgeemError, EstimatorStepError, FormatError, NumericError, SchemaError
from .estimator import EstimatorConfig, compare_estimators, identify_segment, save_run_metadata
from .flightdata import CruiseCriteria, FlightSegment, align_and_convert, detect_cruise_segments, load_segment
from .fleet import FlightResult, aggregate, load_results_dir, write_fleet_outputs
from .simgen import scenario_from_json, simulate_segment

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FLAGGED = 3
EXIT_NUMERIC = 4


def worker_count() -> int:
    """Parallelism cap from CGEEM_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("CGEEM_THREADS", "1")))
    except ValueError:
        return 1


def _timestamp() -> str:
    """UTC timestamp; honours SOURCE_DATE_EPOCH for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def write_manifest(out_dir: Path, command: str, inputs: dict, outputs: list[str],
                   seed=None, config_paths=None):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "timestamp": _timestamp(),
        "seed": seed,
        "inputs": inputs,
        "config_paths": config_paths or [],
        "outputs": sorted(outputs),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(path) -> AircraftConfig:
    if path is None:
        return AircraftConfig()
    return load_aircraft_config(path)


def _estimator_config(args) -> EstimatorConfig:
    return EstimatorConfig(
        p0=args.p0_scale,
        r=args.r_scale,
        estimator_kind=args.estimator,
        forgetting_factor=getattr(args, "lambda_", 1.0),
        drag_model=args.drag_model,
    )


def _write_raw_csv(raw, path):
    codes = sorted(raw.channels)
    rows: dict[float, dict[str, float]] = {}
    for code in codes:
        series = raw.channels[code]
        for t, v in zip(series.t, series.values):
            rows.setdefault(round(float(t), 9), {})[code] = float(v)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + codes)
        for t in sorted(rows):
            row = [repr(t)]
            for code in codes:
                value = rows[t].get(code)
                row.append(repr(value) if value is not None else "")
            writer.writerow(row)


# --- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        scenario = scenario_from_json(args.scenario)
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.seed is not None:
        from dataclasses import replace
        scenario = replace(scenario, seed=args.seed)
    try:
        result = simulate_segment(scenario)
    except CgeemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_path = out_dir / "pseudo_qar.csv"
    truth_path = out_dir / "truth.json"
    _write_raw_csv(result.raw, raw_path)
    with open(truth_path, "w") as fh:
        json.dump(result.scenario.truth.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out_dir, "simulate", {"scenario": str(args.scenario)},
                   [raw_path.name, truth_path.name], seed=scenario.seed,
                   config_paths=[str(args.scenario)])
    print(f"wrote {raw_path} and {truth_path}")
    return EXIT_OK


def cmd_extract(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        raw = load_segment(args.flight_csv)
        full = align_and_convert(raw, grid_rate_hz=args.grid_hz)
    except (SchemaError, FormatError, CgeemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    criteria = CruiseCriteria()
    segments = detect_cruise_segments(full, criteria)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for segment in segments:
        path = out_dir / f"{segment.flight_id}.csv"
        segment.to_csv(path)
        outputs.append(path.name)
    write_manifest(out_dir, "extract", {"flight_csv": str(args.flight_csv),
                                        "grid_hz": args.grid_hz}, outputs)
    print(f"extracted {len(segments)} cruise segment(s) to {out_dir}")
    return EXIT_OK


def cmd_identify(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        segment = FlightSegment.from_csv(args.segment_csv)
        segment.validate()
        cfg = _load_config(args.aircraft_config)
        ecfg = _estimator_config(args)
    except (SchemaError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not segment.aircraft_type:
        segment.aircraft_type = cfg.aircraft_type
    try:
        trace, report = identify_segment(segment, cfg, ecfg, CvThresholds())
    except (EstimatorStepError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    result_path = out_dir / "result.json"
    meta_path = out_dir / "run_metadata.json"
    trace.to_csv(trace_path)
    save_run_metadata(trace, meta_path, seed=args.seed)
    result = FlightResult(
        flight_id=segment.flight_id or Path(args.segment_csv).stem,
        tail_id=segment.tail_id, aircraft_type=segment.aircraft_type,
        representative=report.representative, report=report,
    )
    result.to_json(result_path)
    write_manifest(out_dir, "identify",
                   {"segment_csv": str(args.segment_csv)},
                   [trace_path.name, result_path.name, meta_path.name],
                   seed=args.seed,
                   config_paths=[str(args.aircraft_config)] if args.aircraft_config else [])
    print(f"verdict: {report.verdict}"
          + (f" (failing: {', '.join(report.failing_parameters())})"
             if not report.converged else ""))
    return EXIT_OK if report.converged else EXIT_FLAGGED


def cmd_compare(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        segment = FlightSegment.from_csv(args.segment_csv)
        segment.validate()
        cfg = _load_config(args.aircraft_config)
        base = EstimatorConfig(p0=args.p0_scale, r=args.r_scale,
                               drag_model=args.drag_model)
    except (SchemaError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = compare_estimators(segment, cfg, base)
    out_dir.mkdir(parents=True, exist_ok=True)
    gains_path = out_dir / "gain_norms.csv"
    summary_path = out_dir / "comparison.json"
    report.gain_csv(gains_path)
    with open(summary_path, "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out_dir, "compare", {"segment_csv": str(args.segment_csv)},
                   [gains_path.name, summary_path.name],
                   config_paths=[str(args.aircraft_config)] if args.aircraft_config else [])
    print(f"compared {len(report.rows)} estimator variants")
    return EXIT_OK


def cmd_fleet(args) -> int:
    results_dir = Path(args.results_dir)
    if not results_dir.is_dir():
        print(f"error: {results_dir} is not a directory", file=sys.stderr)
        return EXIT_INPUT
    try:
        results = load_results_dir(results_dir)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    summary = aggregate(results)
    out_dir = Path(args.out_dir)
    write_fleet_outputs(summary, out_dir)
    outputs = [p.name for p in out_dir.iterdir() if p.name != "manifest.json"]
    write_manifest(out_dir, "fleet", {"results_dir": str(results_dir),
                                      "n_results": len(results)}, outputs)
    print(f"aggregated {sum(ts.flights for ts in summary.types.values())} converged "
          f"flight(s) over {len(summary.types)} type(s); {len(summary.flagged)} flagged")
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgeem",
        description="Constant-gain equation-error identification of "
                    "longitudinal aerodynamic parameters from flight-recorder data.",
    )
    parser.add_argument("--version", action="version", version=f"cgeem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a pseudo-recorder dataset")
    sim.add_argument("scenario", help="scenario JSON file")
    sim.add_argument("out_dir", help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    sim.set_defaults(func=cmd_simulate)

    ext = sub.add_parser("extract", help="detect cruise segments in a raw flight CSV")
    ext.add_argument("flight_csv", help="raw multi-rate channel CSV")
    ext.add_argument("out_dir", help="output directory for segment CSVs")
    ext.add_argument("--grid-hz", type=float, default=1.0, help="common grid rate")
    ext.set_defaults(func=cmd_extract)

    ident = sub.add_parser("identify", help="estimate parameters on one segment")
    ident.add_argument("segment_csv", help="aligned SI segment CSV")
    ident.add_argument("out_dir", help="output directory")
    ident.add_argument("--aircraft-config", default=None, help="AircraftConfig JSON")
    ident.add_argument("--estimator", choices=("cg", "rls"), default="cg")
    ident.add_argument("--lambda", dest="lambda_", type=float, default=1.0,
                       help="RLS forgetting factor")
    ident.add_argument("--drag-model", choices=("polar", "linear"), default="polar")
    ident.add_argument("--p0-scale", type=float, default=1e2)
    ident.add_argument("--r-scale", type=float, default=1e-1)
    ident.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    ident.set_defaults(func=cmd_identify)

    comp = sub.add_parser("compare", help="CG vs RLS comparison on one segment")
    comp.add_argument("segment_csv")
    comp.add_argument("out_dir")
    comp.add_argument("--aircraft-config", default=None)
    comp.add_argument("--drag-model", choices=("polar", "linear"), default="polar")
    comp.add_argument("--p0-scale", type=float, default=1e2)
    comp.add_argument("--r-scale", type=float, default=1e-1)
    comp.set_defaults(func=cmd_compare)

    flt = sub.add_parser("fleet", help="aggregate per-flight result JSONs")
    flt.add_argument("results_dir")
    flt.add_argument("out_dir")
    flt.set_defaults(func=cmd_fleet)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
