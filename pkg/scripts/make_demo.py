#!/usr/bin/env python3
"""Regenerate the bundled demo dataset (CSV plus feature-kind sidecar).

    python3 scripts/make_demo.py [--out-dir DIR]
"""

import argparse
import json
from pathlib import Path

from fsbench.data import kinds_sidecar_path, write_csv
from fsbench.resources import DEMO_DIR
from fsbench.synthetic import make_demo


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", default=str(DEMO_DIR))
    ap.add_argument("--rows", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = make_demo(args.rows, args.seed)
    csv_path = out / "demo.csv"
    write_csv(d, csv_path)
    kinds = {n: k.value for n, k in zip(d.feature_names, d.feature_kinds)}
    kinds_sidecar_path(csv_path).write_text(json.dumps(kinds, indent=1) + "\n", encoding="utf-8")
    n_benign, n_mal = d.class_counts()
    print(f"wrote {csv_path}: {d.n_rows} rows ({n_mal} malware, {n_benign} benign), {d.n_cols} features")


if __name__ == "__main__":
    main()
