"""Grid-maximised constants of the semigroup error kernel under repeated refinement.

    python scripts/semigroup_scan.py [--levels 3]
"""
import argparse

import numpy as np

from acsplit.analysis import semigroup_bound_scan

PAIRS = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 2)]


def grids(r, t_spacing):
    lam = np.logspace(0, 6, 200 * r)
    k = np.logspace(-4, 0, 50 * r)
    if t_spacing == "log":
        t = np.logspace(-8, 0, 50 * r)
    else:
        t = np.linspace(1 / (50 * r), 1, 50 * r)
    return lam, k, t


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    refinements = [2**i for i in range(args.levels)]
    for spacing in ("log", "linear"):
        print(f"t grid: {spacing}")
        print("  (s,r) " + "".join(f"{f'x{r}':>12}" for r in refinements))
        for s, r in PAIRS:
            vals = [semigroup_bound_scan(s, r, *grids(m, spacing)) for m in refinements]
            print(f"  ({s},{r}) " + "".join(f"{v:12.6f}" for v in vals))


if __name__ == "__main__":
    main()
