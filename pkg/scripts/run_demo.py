#!/usr/bin/env python3
"""Benchmark a few methods on the bundled demo dataset and write every report.

    python3 scripts/run_demo.py [--out DIR] [--methods lasso,rfe,pca,relieff] [--threads N]
"""

import argparse
import sys
from pathlib import Path

from fsbench import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="demo-run")
    ap.add_argument("--methods", default="lasso,rfe,pca,relieff,chi_square,sigapi")
    ap.add_argument("--models", default="knn,rf,svm-linear")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    code = cli.main(["-v", "run", "--demo", "--methods", args.methods, "--models", args.models,
                     "--seed", str(args.seed), "--threads", str(args.threads),
                     "--output-dir", str(out), "--force"])
    if code == cli.EXIT_ERROR:
        return code
    store = str(out / cli.STORE_NAME)
    for view, fmt in (("summary", "csv"), ("heatmap", "csv"), ("heatmap", "svg"), ("box", "json"), ("box", "svg")):
        cli.main(["report", store, "--view", view, "--format", fmt])
    print((out / "summary-complete.csv").read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
