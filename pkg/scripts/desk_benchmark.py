"""Run the desk-scale method matrix and print the trend summary.

    python scripts/desk_benchmark.py --out runs/desk --jobs 4
"""
import argparse
import resource
import time

from faultbench import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--jobs", type=int, default=bench.default_jobs())
    ap.add_argument("--resume", action="store_true")
    args = ap.parse_args()

    cfg = bench.BenchConfig.desk()
    t0 = time.perf_counter()
    results = bench.run_matrix(cfg, args.out, resume=args.resume, jobs=args.jobs,
                               progress=lambda r: print(f"  {r.dataset} {r.method:8s} "
                                                        f"{r.classifier:3s} A={r.accuracy:.4f} "
                                                        f"size={r.size}", flush=True))
    elapsed = time.perf_counter() - t0
    bench.emit_report(results, ["csv", "md", "json"], args.out)
    peak = max(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
               resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss) / 1024
    print(f"\n{len(results)} cells in {elapsed:.0f}s with {args.jobs} job(s), "
          f"largest process {peak:.0f} MB")
    for row in bench.trend_summary(results):
        print(f"{row['group']:>10} {str(row['key']):>8}  n={row['n']:3d}  "
              f"A={row['accuracy']:.4f}  F1={row['f1']:.4f}")
    for scope in ("FS", "DR"):
        top = bench.rank_combinations(results, "accuracy", scope)[:3]
        print(f"top {scope}: " + ", ".join(f"{e.method}+{e.classifier} {e.value:.4f}" for e in top))
    bench.report_errors(results)


if __name__ == "__main__":
    main()
