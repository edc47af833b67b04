"""Baseline accuracy of each classifier against SNR at desk scale, over a few seeds.

    python scripts/snr_trend.py --seeds 42 43 44 --classifiers knn svm
"""
import argparse

import numpy as np

from faultbench import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[42, 43, 44])
    ap.add_argument("--snr", type=float, nargs="+", default=[10.0, 30.0, 70.0])
    ap.add_argument("--fr", type=float, nargs="+", default=[1.0])
    ap.add_argument("--classifiers", nargs="+", default=["knn"])
    args = ap.parse_args()

    table = {}
    for seed in args.seeds:
        cfg = bench.BenchConfig.desk(snr_list=args.snr, fr_list=args.fr, data_seed=seed,
                                     classifiers=args.classifiers, fs_methods=[], dr_methods=[])
        for r in bench.run_baseline(cfg):
            table.setdefault((r.classifier, r.snr_db, r.fr_ohm), []).append(r.accuracy)
    print(f"{'clf':>4} {'snr':>5} {'fr':>5}  " + "  ".join(f"s{s}" for s in args.seeds) + "   mean")
    for (clf, snr, fr), accs in sorted(table.items()):
        cells = "  ".join(f"{a:.3f}" for a in accs)
        print(f"{clf:>4} {snr:5g} {fr:5g}  {cells}  {np.mean(accs):.3f}")


if __name__ == "__main__":
    main()
