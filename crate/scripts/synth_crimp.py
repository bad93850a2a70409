#!/usr/bin/env python3
"""Generate a synthetic crimp force-curve dataset.

Writes two CSV files (id,label,defect_class,v0..v499):

  eval.csv        3 ok reference curves (ref-000..ref-002) followed by 150
                  test curves: 50 ok, 50 missing_strands, 50 crimped_insulation,
                  interleaved in a seeded random order
  train_pool.csv  200 ok curves for the Isolation Forest ramp-up

A normal curve is a logistic rise centred near index 180 that decays after
index 350, plus white noise. Missing strands lower the force level;
crimped insulation makes the rise steeper and adds a bump after it.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

N = 500
IDX = np.arange(N, dtype=float)


def base(rng, peak, centre, width):
    rise = 1.0 / (1.0 + np.exp(-(IDX - centre) / width))
    decay = np.exp(-np.clip(IDX - 350.0, 0.0, None) / 60.0)
    return peak * rise * decay


def curve(rng, kind):
    peak = rng.normal(0.66, 0.008)
    centre = rng.normal(180.0, 4.0)
    width = rng.normal(26.0, 1.5)
    if kind == "missing_strands":
        peak *= rng.uniform(0.86, 0.94)
    elif kind == "crimped_insulation":
        width = rng.normal(15.0, 1.5)
    y = base(rng, peak, centre, width)
    if kind == "crimped_insulation":
        y = y + rng.uniform(0.02, 0.05) * np.exp(-(((IDX - 230.0) / 25.0) ** 2))
    return y + rng.normal(0.0, 0.004, N)


def write(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "label", "defect_class"] + [f"v{i}" for i in range(N)])
        for cid, label, cls, values in rows:
            w.writerow([cid, label, cls] + [f"{v:.6g}" for v in values])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("data/crimp-synthetic"))
    ap.add_argument("--seed", type=int, default=20240917)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    kinds = ["ok"] * 50 + ["missing_strands"] * 50 + ["crimped_insulation"] * 50
    order = rng.permutation(len(kinds))
    rows = []
    for n, k in enumerate(order):
        kind = kinds[k]
        label = 0 if kind == "ok" else 1
        cls = "" if kind == "ok" else kind
        rows.append((f"crimp-{n:03d}", label, cls, curve(rng, kind)))

    pool = [(f"pool-{n:03d}", 0, "", curve(rng, "ok")) for n in range(200)]
    write(args.out / "train_pool.csv", pool)

    # Drawn last so the test and pool curves do not depend on them.
    refs = [(f"ref-{n:03d}", 0, "", curve(rng, "ok")) for n in range(3)]
    write(args.out / "eval.csv", refs + rows)


if __name__ == "__main__":
    main()
