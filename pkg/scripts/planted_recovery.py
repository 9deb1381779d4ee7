#!/usr/bin/env python3
"""How often each filter finds the planted features, over many seeds.

Informative columns copy the label and flip it with probability --flip;
the rest are fair coin flips. A seed counts as a hit for a method when its
top-k (k = number of informative columns) holds at least k - 1 of them.

    python3 scripts/planted_recovery.py [--seeds 20] [--rows 2000] [--flip 0.1]
"""

import argparse

import numpy as np

from fsbench.selection import SelectorParams, select
from fsbench.synthetic import make_planted

METHODS = ("chi_square", "info_gain", "anova", "pearson", "mad", "relieff", "lasso")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--informative", type=int, default=5)
    ap.add_argument("--noise", type=int, default=45)
    ap.add_argument("--flip", type=float, default=0.1)
    args = ap.parse_args()

    k = args.informative
    hits = {m: 0 for m in METHODS}
    found = {m: [] for m in METHODS}
    for seed in range(args.seeds):
        d, informative = make_planted(args.rows, k, args.noise, args.flip, seed=seed)
        inf = set(informative.tolist())
        for m in METHODS:
            r = select(m, d, SelectorParams(k=k if m not in ("anova", "lasso") else None, seed=seed))
            chosen = r.selected if r.ranking is None else r.ranking.order()[:k].tolist()
            n = len(inf & set(chosen))
            found[m].append(n)
            hits[m] += n >= k - 1

    print(f"{'method':<12} {'hit rate':>8} {'mean found':>10}")
    for m in METHODS:
        print(f"{m:<12} {hits[m] / args.seeds:>8.2f} {np.mean(found[m]):>10.2f}")


if __name__ == "__main__":
    main()
