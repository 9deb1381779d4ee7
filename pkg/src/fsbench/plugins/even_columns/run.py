#!/usr/bin/env python3
"""Keep every other feature column, starting at --offset (default 0).

Reads the engine's CSV (label in the last column) and writes the reduced
CSV with the same rows in the same order. Standard library only.
"""

import argparse
import csv
import sys


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--input", required=True)
    ap.add_argument("--output", required=True)
    ap.add_argument("--offset", type=int, default=0)
    args = ap.parse_args(argv)
    if args.offset not in (0, 1):
        print("--offset must be 0 or 1", file=sys.stderr)
        return 2

    with open(args.input, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    n_features = len(rows[0]) - 1
    keep = list(range(args.offset, n_features, 2)) + [n_features]
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            if row:
                w.writerow([row[j] for j in keep])
    return 0


if __name__ == "__main__":
    sys.exit(main())
