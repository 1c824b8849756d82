"""Run configuration: key=value parsing, validation, initial-condition families.

Configs are UTF-8 text, one `key=value` per line, `#` comments.  Every key
is checked against the schema and its documented range; errors carry the
offending line number.  Initial conditions are named families; continuous
densities are discretized into weighted atoms cell by cell, preserving the
mass and the first moment of every cell.
"""

import math
import re

import numpy as np

from .measure import Measure, from_text

SCENARIOS = ("evolve-pde", "evolve-particles", "selfsim-profile",
             "assemble-selfsim", "identity-check", "verify")

# key -> (parser, validator, default).  None default means "required" is
# enforced elsewhere (only `scenario` is mandatory).


def _positive(name):
    def check(v):
        if v <= 0.0:
            raise ValueError("%s must be positive" % name)
        return v
    return check


def _nonnegative(name):
    def check(v):
        if v < 0.0:
            raise ValueError("%s must be nonnegative" % name)
        return v
    return check


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError("expected a boolean, got %r" % s)


def _parse_int(s):
    return int(s, 10)


def _parse_ladder(s):
    vals = tuple(float(p) for p in s.split(","))
    if not vals or any(v <= 0.0 for v in vals):
        raise ValueError("eps_ladder entries must be positive")
    return vals


def _identity(name):
    def check(v):
        return v
    return check


_SCHEMA = {
    "scenario": (str.strip, _identity("scenario"), None),
    "x_min": (float, _positive("x_min"), 1e-4),
    "x_max": (float, _positive("x_max"), 1e2),
    "n_nodes": (_parse_int, _positive("n_nodes"), 240),
    "eps": (float, _positive("eps"), 1e-3),
    "eps_ladder": (_parse_ladder, _identity("eps_ladder"),
                   (1e-2, 3e-3, 1e-3)),
    "t_end": (float, _positive("t_end"), 1.0),
    "cadence": (float, _positive("cadence"), 0.25),
    "dt_max": (float, _positive("dt_max"), 0.05),
    "seed": (_parse_int, _nonnegative("seed"), 0),
    "replicas": (_parse_int, _positive("replicas"), 1),
    "n_particles": (_parse_int, _positive("n_particles"), 10000),
    "absorb_threshold": (float, _nonnegative("absorb_threshold"), 0.0),
    "initial": (str.strip, _identity("initial"), "uniform(1,2,1)"),
    "diagonal": (str.strip, _identity("diagonal"), "auto"),
    "E": (float, _nonnegative("E"), 1.0),
    "tol": (float, _positive("tol"), 1e-3),
    "max_pseudo_time": (float, _positive("max_pseudo_time"), 600.0),
    "M": (float, _nonnegative("M"), 0.0),     # 0 means "derive from l1"
    "t0": (float, _positive("t0"), 1.0),
    "out": (str.strip, _identity("out"), "out"),
    "figures": (_parse_bool, _identity("figures"), True),
    "workers": (_parse_int, _positive("workers"), 1),
}

_DIAGONAL_MODES = ("auto", "atomic", "continuum")


class ConfigError(ValueError):
    """Configuration error with the source line number when applicable."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class RunConfig:
    """Validated run configuration with defaults applied."""

    def __init__(self, values):
        for key, (_, _, default) in _SCHEMA.items():
            setattr(self, key, values.get(key, default))

    def echo(self):
        """Deterministic key=value text of the effective configuration."""
        lines = []
        for key in sorted(_SCHEMA):
            v = getattr(self, key)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append("%s=%s" % (key, v))
        return "\n".join(lines) + "\n"


def parse_config(text, overrides=None):
    """Parse key=value configuration text into a RunConfig.

    overrides (a dict of raw string values) take precedence over the file,
    mirroring command-line flags.  Raises ConfigError with a line number
    for malformed lines, unknown keys, and out-of-range values; unknown
    scenarios and a missing scenario are reported after parsing.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key=value, got %r" % raw.strip(),
                              lineno)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError("unknown key %r" % key, lineno)
        parser, validate, _ = _SCHEMA[key]
        try:
            values[key] = validate(parser(val))
        except (ValueError, TypeError) as exc:
            raise ConfigError("key %r: %s" % (key, exc), lineno) from exc
    for key, val in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError("unknown key %r" % key)
        parser, validate, _ = _SCHEMA[key]
        try:
            values[key] = validate(parser(val))
        except (ValueError, TypeError) as exc:
            raise ConfigError("key %r: %s" % (key, exc)) from exc
    if "scenario" not in values:
        raise ConfigError("scenario is mandatory")
    cfg = RunConfig(values)
    if cfg.scenario not in SCENARIOS:
        raise ConfigError("unknown scenario %r (expected one of %s)"
                          % (cfg.scenario, ", ".join(SCENARIOS)))
    if cfg.x_min >= cfg.x_max:
        raise ConfigError("x_min must be below x_max")
    if cfg.n_nodes < 2:
        raise ConfigError("n_nodes must be at least 2")
    if cfg.diagonal not in _DIAGONAL_MODES:
        raise ConfigError("diagonal must be one of %s"
                          % ", ".join(_DIAGONAL_MODES))
    return cfg


# ---------------------------------------------------------------------------
# Initial-condition families
# ---------------------------------------------------------------------------

_FAMILY_RE = re.compile(r"^([a-z_0-9]+)\s*(?:\((.*)\))?$")

# families whose natural datum is a continuous density: their atom
# discretizations get the continuum diagonal convention under diagonal=auto
CONTINUUM_FAMILIES = ("uniform", "powerlaw_half", "profile_file")


def uniform_measure(a, b, M, n_cells=400):
    """Uniform density on [a, b] with total mass M as midpoint-cell atoms."""
    if not 0.0 <= a < b:
        raise ValueError("need 0 <= a < b")
    if M <= 0.0:
        raise ValueError("M must be positive")
    edges = np.linspace(a, b, n_cells + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return Measure(0.0, zip(mids.tolist(), [M / n_cells] * n_cells))


def powerlaw_half_measure(x_min, x_max, cells_per_decade=40):
    """Truncated x^(-1/2) density as atoms on geometric cells.

    Each cell carries its exact mass 2 (sqrt(hi) - sqrt(lo)) at its exact
    centroid, so mass and energy of the truncation are preserved.
    """
    if not 0.0 < x_min < x_max:
        raise ValueError("need 0 < x_min < x_max")
    n = max(2, int(round(cells_per_decade * math.log10(x_max / x_min))))
    edges = np.geomspace(x_min, x_max, n + 1)
    lo, hi = edges[:-1], edges[1:]
    mass = 2.0 * (np.sqrt(hi) - np.sqrt(lo))
    centroid = (2.0 / 3.0) * (hi ** 1.5 - lo ** 1.5) / mass
    return Measure(0.0, zip(centroid.tolist(), mass.tolist()))


def dirac0_measure(M):
    """All mass already condensed at the origin."""
    if M < 0.0:
        raise ValueError("M must be nonnegative")
    return Measure(M, [])


def twoatom_measure(x1, x2, w1, w2):
    if min(x1, x2) <= 0.0 or min(w1, w2) <= 0.0:
        raise ValueError("positions and weights must be positive")
    return Measure(0.0, [(x1, w1), (x2, w2)])


def profile_file_measure(path):
    with open(path, "r", encoding="utf-8") as fh:
        return from_text(fh.read())


def build_initial(descriptor):
    """Build the initial Measure from a family descriptor string.

    Returns (measure, family_name).  Known families: dirac0(M),
    uniform(a,b,M), powerlaw_half(x_min,x_max), twoatom(x1,x2,w1,w2),
    profile_file(path).
    """
    m = _FAMILY_RE.match(descriptor.strip())
    if not m:
        raise ConfigError("malformed initial descriptor %r" % descriptor)
    name, args = m.group(1), m.group(2)
    parts = [p.strip() for p in args.split(",")] if args else []
    try:
        if name == "dirac0":
            (M,) = map(float, parts)
            return dirac0_measure(M), name
        if name == "uniform":
            a, b, M = map(float, parts)
            return uniform_measure(a, b, M), name
        if name == "powerlaw_half":
            x_min, x_max = map(float, parts)
            return powerlaw_half_measure(x_min, x_max), name
        if name == "twoatom":
            x1, x2, w1, w2 = map(float, parts)
            return twoatom_measure(x1, x2, w1, w2), name
        if name == "profile_file":
            (path,) = parts
            return profile_file_measure(path), name
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("initial %r: %s" % (descriptor, exc)) from exc
    raise ConfigError("unknown initial family %r" % name)


def resolve_diag_zero(cfg, family):
    """Map the diagonal config mode to the solver flag for this datum."""
    if cfg.diagonal == "atomic":
        return True
    if cfg.diagonal == "continuum":
        return False
    return family not in CONTINUUM_FAMILIES
