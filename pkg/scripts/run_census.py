"""Full N=6 anomaly census over the default Euler-angle grid.

    python3 scripts/run_census.py --out census --workers 4
"""
import argparse
import json
import logging
import time
from pathlib import Path

from obsmech.scanner import SweepGrid, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("census"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--cache-dir", type=Path)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary, _ = run_sweep(SweepGrid(), args.out / "records.csv", args.workers, args.cache_dir)
    (args.out / "summary.json").write_text(summary.to_json())
    print(json.dumps(summary.counts, indent=1))
    print(f"elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
