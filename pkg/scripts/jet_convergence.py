"""Jet-matching residual of the section extension under normal-grid refinement.

Prints and writes (h, residual, observed order) for several random jets.
"""

import argparse

import numpy as np

from jtame import jet_extension as jx
from jtame.reports import write_table


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jets", type=int, default=5)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--out", default="jet_convergence.csv")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    rows = []
    for j in range(args.jets):
        F = jx.random_section_jet(rng, 16, rng.uniform(0.05, 0.5))
        grids = [jx.TubeGrid(16, 16 * 2**k + 1, 0.2) for k in range(args.levels)]
        res = [jx.jet_matching_residual(F, 0.2, g) for g in grids]
        orders = [float("nan")] + jx.observed_orders([g.spacing for g in grids], res).tolist()
        for g, r, p in zip(grids, res, orders):
            rows.append((j, g.spacing, r, p))
            print(f"jet {j}: h={g.spacing:.5f} residual={r:.3e} order={p:.3f}")
    write_table(args.out, ("jet", "h", "residual", "order"), rows)


if __name__ == "__main__":
    main()
