#!/usr/bin/env python3
import argparse
import csv
import sys

ap = argparse.ArgumentParser()
ap.add_argument("--input", required=True)
ap.add_argument("--output", required=True)
args = ap.parse_args()
with open(args.input, newline="") as fh:
    rows = list(csv.reader(fh))
with open(args.output, "w", newline="") as fh:
    csv.writer(fh, lineterminator="\n").writerows(rows)
