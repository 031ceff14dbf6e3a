"""How much do measured strong errors move when the mode count doubles?

Runs the default study at a few mode counts on the same seeds (the noise of
retained modes does not depend on the truncation) and prints the relative
change of each level's rms error.
"""
import argparse

from acsplit.analysis import mc_rate_study
from acsplit.config import RunConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--modes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--samples", type=int, default=32)
    args = ap.parse_args()
    rows = {}
    for n in args.modes:
        cfg = RunConfig()
        cfg.domain.n_modes = n
        cfg.noise.samples = args.samples
        cfg.study.reference_check = False
        rep = mc_rate_study(cfg)
        rows[n] = [lv.rms for lv in rep.levels]
        print(f"n_modes={n:4d} slope={rep.fitted_slope:.3f} rms=" + " ".join(f"{e:.4e}" for e in rows[n]))
    ns = sorted(rows)
    for a, b in zip(ns, ns[1:]):
        change = max(abs(y - x) / x for x, y in zip(rows[a], rows[b]))
        print(f"{a} -> {b} modes: max relative change of rms error {change:.2e}")


if __name__ == "__main__":
    main()
