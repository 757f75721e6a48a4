"""Run every scenario config under configs/ and collect a one-line summary per run.

    python3 scripts/run_scenarios.py --out runs
"""

import argparse
import glob
import os
import sys

from jtame import cli

SUBCOMMAND = {"linear": "linear", "isotopy": "isotopy", "inflate": "inflate", "prepare": "prepare"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--configs", default=os.path.join(os.path.dirname(__file__), "..", "configs"))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--grid-scale", default="1.0")
    args = ap.parse_args()
    status = 0
    for path in sorted(glob.glob(os.path.join(args.configs, "*.toml"))):
        name = os.path.splitext(os.path.basename(path))[0]
        sub = SUBCOMMAND.get(name.split("_")[0])
        if sub is None:
            continue
        code = cli.main([sub, "--config", path, "--out", os.path.join(args.out, name),
                         "--grid-scale", args.grid_scale])
        print(f"{name}: exit {code}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
