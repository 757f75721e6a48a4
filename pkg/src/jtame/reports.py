"""Scenario configuration, run reports and deterministic file output.

Config files are TOML::

    kind = "inflate-trivial"       # scenario kind
    seed = 0                       # optional, overridden by --seed
    grid_scale = 1.0               # optional, overridden by --grid-scale

    [params]                       # kind-specific, see SCENARIO_DEFAULTS
    t_target = 5.0

    [tolerances]                   # optional overrides of the tiers
    structural = 1e-12
    derived = 1e-9
    sampled = 1e-6
    relative = 0.01

Every numeric output carries the tolerance tier it was checked against.
"""

import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .linear_core import DERIVED_TOL, SAMPLED_TOL, STRUCTURAL_TOL

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Unparseable config or a scenario that violates a precondition."""


@dataclass(frozen=True)
class Tolerances:
    structural: float = STRUCTURAL_TOL
    derived: float = DERIVED_TOL
    sampled: float = SAMPLED_TOL
    relative: float = 0.01

    def tier(self, name):
        return getattr(self, name)

    @classmethod
    def uniform(cls, value):
        return cls(value, value, value, value)


SCENARIO_DEFAULTS = {
    "linear-sweep": dict(N_values=[0.0, 0.5, 1.0, 1.5, 1.99], non_tame=[2.0, 2.5], n_angles=8,
                         n_random=200),
    "isotopy-sweep": dict(n_cases=100, N_max=1.5, epsilon=0.05, n_sweep=2000),
    "inflate-trivial": dict(t_target=5.0, eps1=0.5, eps2=1.0, n_r=512, n_theta=64),
    "inflate-negative": dict(m=1, M_prime=0.8, eps1=0.5, eps2=1.0, radius=0.45, n_r=512,
                             n_theta=64),
    "inflate-positive-bound": dict(m=1, eps1=0.5, M_prime=[0.1, 6.0], eps1_sweep=[0.3, 0.5, 0.7, 0.9],
                                   radius=0.45, n_r=512, n_theta=64),
    "prepare": dict(n0=1.0, n1=0.0, k=1, shear=0.2, n_z=32, n_normal=25, half_width=0.5),
}

SUBCOMMAND_KINDS = {
    "linear": ("linear-sweep",),
    "isotopy": ("isotopy-sweep",),
    "inflate": ("inflate-trivial", "inflate-negative", "inflate-positive-bound"),
    "prepare": ("prepare",),
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    params: dict
    seed: int = 0
    grid_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in SCENARIO_DEFAULTS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        unknown = set(self.params) - set(SCENARIO_DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not (self.grid_scale > 0.0 and math.isfinite(self.grid_scale)):
            raise ConfigError("grid scale must be positive")

    @classmethod
    def build(cls, kind, params=None, **kw):
        merged = dict(SCENARIO_DEFAULTS.get(kind, {}))
        merged.update(params or {})
        return cls(kind=kind, params=merged, **kw)

    def scaled(self, n):
        """Grid resolution ``n`` multiplied by the grid scale (at least 4)."""
        return max(4, int(round(n * self.grid_scale)))


def load_config(path):
    """Parse a TOML config into ``(kind, params, seed, grid_scale, Tolerances)``."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    tol_raw = raw.get("tolerances", {})
    names = {f.name for f in fields(Tolerances)}
    if set(tol_raw) - names:
        raise ConfigError(f"unknown tolerance tiers {sorted(set(tol_raw) - names)}")
    try:
        tol = replace(Tolerances(), **{k: float(v) for k, v in tol_raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad tolerance value: {exc}") from None
    extra = set(raw) - {"kind", "seed", "grid_scale", "params", "tolerances"}
    if extra:
        raise ConfigError(f"unknown top-level keys {sorted(extra)}")
    return raw.get("kind"), dict(raw.get("params", {})), raw.get("seed"), raw.get("grid_scale"), tol


@dataclass
class Check:
    """One pass/fail entry; ``invariant`` names the module property it exercises."""

    name: str
    invariant: str
    measured: float
    tolerance: float
    tier: str
    passed: bool


@dataclass
class RunReport:
    scenario: dict
    outputs: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    wall_time: float = 0.0

    def output(self, name, value, tol, tier):
        self.outputs[name] = {"value": value, "tolerance": tol, "tier": tier}

    def check_le(self, name, invariant, measured, tol, tier):
        """Pass when ``measured <= tol``."""
        self.checks.append(Check(name, invariant, float(measured), float(tol), tier,
                                 bool(measured <= tol)))

    def check_true(self, name, invariant, ok, measured=math.nan):
        self.checks.append(Check(name, invariant, float(measured), 0.0, "exact", bool(ok)))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def merge(self, prefix, other):
        for k, v in other.outputs.items():
            self.outputs[f"{prefix}.{k}"] = v
        for c in other.checks:
            self.checks.append(replace(c, name=f"{prefix}.{c.name}"))
        self.files.extend(other.files)

    def to_dict(self):
        """Deterministic content; wall time is deliberately excluded."""
        d = asdict(self)
        d.pop("wall_time")
        d["passed"] = self.passed
        return jsonable(d)


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no inf/nan; keep them readable and stable
        return x if math.isfinite(x) else repr(x)
    return x


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(jsonable(obj), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def write_table(path, header, rows):
    """RFC-4180 CSV; floats written with ``repr`` so they round-trip exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_checks(path, report):
    rows = [(c.name, c.invariant, c.measured, c.tolerance, c.tier, "pass" if c.passed else "fail")
            for c in report.checks]
    write_table(path, ("check", "invariant", "measured", "tolerance", "tier", "result"), rows)
