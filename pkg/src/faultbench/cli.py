"""Command-line entry point: ``generate``, ``run`` and ``report``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import bench, gridsim


def cmd_generate(args) -> int:
    snrs = args.snr or [10.0, 30.0, 70.0]
    frs = args.fr or [1.0, 10.0]
    rate = 2000.0 if args.desk else args.sample_rate
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = gridsim.build_topology(args.buses, args.topology_seed)
    for ds_id, snr, fr in gridsim.dataset_grid(snrs, frs):
        t0 = time.perf_counter()
        data = gridsim.build_dataset(grid, snr, fr, seed=args.seed, sample_rate_hz=rate)
        csv_path, _ = gridsim.save_dataset(data, out / ds_id)
        n, p = data.shape
        print(f"{ds_id}: snr={snr:g} dB fr={fr:g} ohm -> {n}x{p}, {data.n_classes} classes "
              f"({time.perf_counter() - t0:.1f}s) {csv_path}")
    return 0


def _load_config(args) -> bench.BenchConfig:
    base = bench.BenchConfig.desk() if args.preset == "desk" else bench.BenchConfig()
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        base = bench.BenchConfig.from_dict({**base.to_dict(), **doc})
    return base


def cmd_run(args) -> int:
    config = _load_config(args)
    if args.print_config:
        print(config.to_json())
        return 0
    if not args.out:
        print("run: --out is required", file=sys.stderr)
        return 2
    jobs = args.jobs or config.jobs
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json() + "\n")
    total = config.n_cells()
    done = [0]

    def progress(r):
        done[0] += 1
        if not args.quiet:
            status = r.error or f"A={r.accuracy:.4f} F1={r.f1:.4f} size={r.size}"
            print(f"[{done[0]}/{total}] {r.dataset} {r.method} {r.classifier}: {status}",
                  file=sys.stderr)

    t0 = time.perf_counter()
    results = bench.run_matrix(config, out, resume=args.resume, jobs=jobs, progress=progress)
    elapsed = time.perf_counter() - t0
    bench.emit_report(results, ["csv", "md", "json"], out)
    timings = {"elapsed_s": round(elapsed, 3), "jobs": jobs,
               "cells": {"/".join(r.cell): r.wall_time for r in results}}
    (out / "timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True) + "\n")
    n_err = bench.report_errors(results)
    print(f"{len(results) - n_err} results, {n_err} error cells, {elapsed:.1f}s -> {out}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.input)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    if (src / "cells").is_dir():
        results = bench.canonical_sort(bench.load_cells(src / "cells"))
    elif (src / "report.json").is_file():
        results = bench.results_from_json(src / "report.json")
    else:
        print(f"report: no cells/ or report.json under {src}", file=sys.stderr)
        return 1
    written = bench.emit_report(results, formats, Path(args.out) if args.out else src)
    bench.report_errors(results)
    for p in written:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faultbench",
                                     description="FS/DR x classifier fault-diagnosis benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write surrogate datasets as CSV + JSON sidecar")
    g.add_argument("--snr", type=float, action="extend", nargs="+", help="SNR values in dB")
    g.add_argument("--fr", type=float, action="extend", nargs="+", help="fault resistances in ohm")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", required=True)
    g.add_argument("--sample-rate", type=float, default=10_000.0)
    g.add_argument("--desk", action="store_true", help="50 rows per class (2 kHz)")
    g.add_argument("--buses", type=int, default=118)
    g.add_argument("--topology-seed", type=int, default=1)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run the method matrix")
    r.add_argument("--config", help="JSON file with BenchConfig fields")
    r.add_argument("--preset", choices=("full", "desk"), default="full")
    r.add_argument("--out")
    r.add_argument("--resume", action="store_true")
    r.add_argument("--jobs", type=int)
    r.add_argument("--print-config", action="store_true")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit reports from a run directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", default="csv,md,json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
