"""Estimator spread versus measurement strength and pair budget.

Writes a plot-ready CSV (theta, budget, mean, std, stderr, n_failed, truth).

    python3 scripts/snr_sweep.py --out snr.csv --trials 200
"""

import argparse
import csv

import numpy as np

from weaktime.grid import TemporalGrid
from weaktime.noise import ShotNoiseConfig, estimator_variance_sweep
from weaktime.states import gaussian_pulse


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="snr_sweep.csv")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--budgets", type=float, nargs="+", default=[1e4, 1e5, 1e6])
    ap.add_argument("--n-theta", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    g = TemporalGrid(64, 0.3)
    psi = gaussian_pulse(g, 0.5, 1.0, chirp=0.2)
    thetas = np.linspace(0.05, np.pi / 4, args.n_theta)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "budget", "mean", "std", "stderr", "n_failed", "truth"])
        for b in args.budgets:
            rows = estimator_variance_sweep(psi, thetas, ShotNoiseConfig(int(b), args.seed),
                                            args.trials, workers=args.workers)
            for r in rows:
                w.writerow([f"{r.theta:.17g}", int(b), f"{r.mean:.17g}", f"{r.std:.17g}",
                            f"{r.stderr:.17g}", r.n_failed, f"{r.truth:.17g}"])
                print(f"N={int(b):>8d} theta={r.theta:.3f} mean={r.mean:+.5f} "
                      f"std*sqrt(N)={r.std * np.sqrt(b):8.2f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
