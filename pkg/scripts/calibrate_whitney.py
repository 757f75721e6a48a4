"""Measured (eps0, kappa) for the diffeomorphism extension on a few grids.

These constants are properties of the discrete model and the extension
recipe, not universal constants; the table shows how they move with the
grid and the support radius.
"""

import argparse

from jtame import jet_extension as jx
from jtame.reports import write_table


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="calibration.csv")
    args = ap.parse_args()
    rows = []
    for n_z, n_normal in ((16, 13), (32, 25), (64, 33)):
        grid = jx.TubeGrid(n_z, n_normal, 0.5)
        for frac in (0.25, 0.5, 1.0):
            cal = jx.calibrate_constants(grid, seed=args.seed, R=frac * grid.half_width)
            rows.append((n_z, n_normal, frac * grid.half_width, cal.eps0, cal.kappa))
            print(f"grid ({n_z}, {n_normal}) R={frac * grid.half_width:.3f}: eps0={cal.eps0} kappa={cal.kappa:.4f}")
    write_table(args.out, ("n_z", "n_normal", "R", "eps0", "kappa"), rows)


if __name__ == "__main__":
    main()
