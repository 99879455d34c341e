"""Deterministic phase table: predicted versus recursion-measured scalings.

Thin wrapper around ``erw phase-scan`` that prints an aligned table instead
of writing CSV.
"""

import argparse

from erw.cli import parse_grid, phase_row


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-alpha", default="0.25,0.4,0.5,0.7,0.75,0.9")
    ap.add_argument("--grid-gamma", default="0.3,0.5,0.8")
    ap.add_argument("--beta", type=float, default=0.0)
    ap.add_argument("--n", type=int, default=10**6)
    args = ap.parse_args()
    cols = ("predicted_exponent", "measured_exponent", "predicted_mean", "measured_mean", "predicted_second", "measured_second")
    print(f"{'alpha':>6} {'gamma':>6} {'regime':>7} {'limit':>15} " + " ".join(f"{c[:14]:>14}" for c in cols))
    for a in parse_grid(args.grid_alpha):
        for g in parse_grid(args.grid_gamma):
            r = phase_row(a, g, args.beta, args.n)
            vals = " ".join(f"{r[c]:14.5g}" for c in cols)
            print(f"{a:6.3g} {g:6.3g} {r['regime']:>7} {r['limit_kind']:>15} {vals}")


if __name__ == "__main__":
    main()
