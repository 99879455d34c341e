"""Pilot Monte Carlo for the simple-walk iterated-logarithm band.

For each start time, reports the distribution over seeds of
``max_{n0 <= n <= n_max} |S_n| / phi(n)`` and the fraction inside the band.
"""

import argparse

import numpy as np

from erw.ensemble import lil_diagnostic
from erw.model import WalkParams
from erw.verify import LIL_BAND


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10**7)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--first-seed", type=int, default=1000)
    ap.add_argument("--starts", type=int, nargs="+", default=[10, 100, 1000])
    args = ap.parse_args()
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    lo, hi = LIL_BAND
    for n0 in args.starts:
        recs = lil_diagnostic(WalkParams(0.0), args.n, seeds, n_start=n0)
        x = np.array([r.final() for r in recs])
        inside = np.mean((x >= lo) & (x <= hi))
        q = np.quantile(x, [0.01, 0.05, 0.5, 0.95, 0.99])
        print(f"n0={n0:>6}  quantiles(1,5,50,95,99%)={np.round(q, 3)}  in [{lo}, {hi}]: {inside:.3f}")


if __name__ == "__main__":
    main()
