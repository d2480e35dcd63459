"""Equilibrium-prediction quality over the theta grid, central one- and two-site observables.

    python3 scripts/benchmark_prediction.py --n-sites 12
"""
import argparse
import math
import time

import numpy as np

from obsmech.model import ChainSpec
from obsmech.pipeline import central_observables, nats_comparison, system, theta_reports


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-sites", type=int, default=12)
    ap.add_argument("--cache-dir")
    args = ap.parse_args()
    t0 = time.perf_counter()
    s = system(ChainSpec(args.n_sites), args.cache_dir)
    print(f"diagonalized N={args.n_sites} in {time.perf_counter() - t0:.1f} s, {s.grouping.n_levels} levels")
    obs = central_observables(s.spec)
    two = []
    print(f"{'theta':>7} {'observable':>10} {'tvd_est':>10} {'tvd_nats':>10} {'delta_r':>8}")
    for k in range(5):
        th = k * math.pi / 16
        reps = theta_reports(s, th, obs)
        _, rows = nats_comparison(reps)
        for row in rows:
            print(f"{th:7.4f} {row['observable']:>10} {row['tvd_est']:10.3g} {row['tvd_nats']:10.3g} "
                  f"{row['delta_r']:8.3f}")
            if len(row["p_nats"]) == 4:
                two.append(row["tvd_est"])
    two = np.array(two)
    print(f"two-body: max TVD {two.max():.4g}, fraction below 0.01 {np.mean(two < 0.01):.2f}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
