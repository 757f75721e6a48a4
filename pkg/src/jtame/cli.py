"""Command line entry point: ``jtame {linear,isotopy,inflate,prepare,selftest}``.

Exit status: 0 when every check passes, 1 on a check failure, 2 on a usage
or config error.  Wall time goes to stdout only, never into artifacts.
"""

import argparse
import sys

from . import runners
from .linear_core import NotTameError
from .reports import SUBCOMMAND_KINDS, ConfigError, Scenario, Tolerances, load_config

INFLATE_CASES = {"trivial": "inflate-trivial", "negative": "inflate-negative",
                 "positive-bound": "inflate-positive-bound"}


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = float(text)
    if not v > 0.0:
        raise argparse.ArgumentTypeError("grid scale must be positive")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="jtame", description="Tameness, isotopy and inflation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("linear", "isotopy", "inflate", "prepare", "selftest"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML scenario file")
        sp.add_argument("--out", default=f"runs/{name}", help="output directory (default: %(default)s)")
        sp.add_argument("--seed", type=_u64, default=None)
        sp.add_argument("--grid-scale", type=_positive, default=None)
        if name == "inflate":
            sp.add_argument("--case", choices=sorted(INFLATE_CASES), default=None,
                            help="inflation regime when no config is given")
    return ap


def _scenario(args):
    kind, params, seed, scale, tol = None, {}, None, None, Tolerances()
    if args.config:
        kind, params, seed, scale, tol = load_config(args.config)
    allowed = SUBCOMMAND_KINDS.get(args.command, ())
    if args.command == "inflate" and args.case:
        case_kind = INFLATE_CASES[args.case]
        if kind is not None and kind != case_kind:
            raise ConfigError(f"--case {args.case} conflicts with config kind {kind!r}")
        kind = case_kind
    kind = kind or allowed[0]
    if kind not in allowed:
        raise ConfigError(f"config kind {kind!r} does not belong to subcommand {args.command!r}")
    seed = args.seed if args.seed is not None else (seed or 0)
    scale = args.grid_scale if args.grid_scale is not None else (scale or 1.0)
    try:
        return Scenario.build(kind, params, seed=int(seed), grid_scale=float(scale)), tol
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _selftest_settings(args):
    seed, scale, tol = 0, 1.0, Tolerances()
    if args.config:
        kind, params, c_seed, c_scale, tol = load_config(args.config)
        if kind not in (None, "selftest") or params:
            raise ConfigError("a selftest config may only set seed, grid_scale and tolerances")
        seed, scale = c_seed or 0, c_scale or 1.0
    if args.seed is not None:
        seed = args.seed
    if args.grid_scale is not None:
        scale = args.grid_scale
    return int(seed), float(scale), tol


def _summary(report, out):
    for c in report.checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark}  {c.name:<40s} measured={c.measured:.6g} tol={c.tolerance:.3g} [{c.tier}]")
    print(f"{len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed; "
          f"artifacts in {out}; wall time {report.wall_time:.2f} s")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            seed, scale, tol = _selftest_settings(args)
            report = runners.selftest(seed=seed, tol=tol, out=args.out, grid_scale=scale)
        else:
            scenario, tol = _scenario(args)
            report = runners.run(scenario, tol, args.out)
    except (ConfigError, NotTameError) as exc:
        print(f"jtame: error: {exc}", file=sys.stderr)
        return 2
    _summary(report, args.out)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
