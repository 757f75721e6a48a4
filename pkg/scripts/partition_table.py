"""Number of isotopy steps d as a function of ||N_J|| and epsilon.

Writes partition.csv with d for the safety factor used by the pipeline and
for the bare step bound, so the effect of the margin is visible.
"""

import argparse

import numpy as np

from jtame.linear_isotopy import time_partition
from jtame.reports import write_table


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="partition.csv")
    ap.add_argument("--safety", type=float, default=0.95)
    args = ap.parse_args()
    rows = []
    for N in np.round(np.arange(0.25, 2.0, 0.25), 2).tolist() + [1.9, 1.99]:
        for eps in (0.2, 0.1, 0.05, 0.02):
            d = len(time_partition(N, eps, safety=args.safety)) - 1
            d_bare = len(time_partition(N, eps, safety=1.0, verify=False)) - 1
            rows.append((N, eps, d, d_bare))
    write_table(args.out, ("N_max", "epsilon", "d", "d_without_safety"), rows)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
