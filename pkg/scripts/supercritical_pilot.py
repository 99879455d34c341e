"""Pilot runs for the fluctuation statistic around the random drift.

Prints, for each (alpha, n), the sample variance and KS distance of T and
the ratio of the exact scale sigma_{n,N} to the asymptotic one.
"""

import argparse

from erw.ensemble import supercritical_fluctuation
from erw.model import WalkParams
from erw.stats import normality_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.6, 0.75, 0.9])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 10_000])
    ap.add_argument("--ratio", type=int, default=20, help="N / n")
    ap.add_argument("--m", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    print(f"{'alpha':>6} {'n':>8} {'N':>9} {'var(T)':>8} {'se':>6} {'KS':>7} {'ratio':>8} {'pred':>8}")
    for a in args.alpha:
        for n in args.n:
            f = supercritical_fluctuation(WalkParams(a), n, args.ratio * n, args.m, args.seed, args.workers)
            r = normality_report(f.t_values)
            print(
                f"{a:6.3g} {n:8d} {f.N:9d} {r.var:8.4f} {r.se_var:6.4f} {r.ks:7.4f} "
                f"{f.sigma_ratio:8.5f} {f.predicted_ratio:8.5f}"
            )


if __name__ == "__main__":
    main()
