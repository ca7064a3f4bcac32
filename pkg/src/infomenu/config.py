"""Run configuration: a TOML file with one table per concern.

Example::

    [value]
    kind = "quadratic"          # quadratic | polynomial | actions | builtin
    scale = 1.0

    [density]
    kind = "uniform"            # uniform | triangular | tilted | rotation | tabulated | spike

    [grid]
    menu = 1001
    verify = 2001

Every key is optional; defaults reproduce the quadratic/uniform example.
Errors name the offending field and, when it can be found, its line.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import core, densities
from .errors import ConfigError, DomainError

DEFAULTS = {
    "value": {"kind": "quadratic", "scale": 1.0},
    "density": {"kind": "uniform"},
    "grid": {"menu": 1001, "verify": 2001, "scan": 512},
    "tolerances": {"ic": 1e-7, "foc": 1e-8, "mechanism": 1e-10, "three_signal": 1e-6,
                   "oracle_relative": 0.03, "monotone": 1e-8},
    "lambda": {"bracket": [0.05, 0.95]},
    "oracle": {"types": 21, "lo": 0.05, "hi": 0.95, "noise_step": 0.1, "catalog": "simple",
               "budget": 2_000_000, "restarts": 64, "seed": 0, "fallback": True, "workers": 1,
               "three_signal_types": 7, "three_signal_step": 0.125},
    "sweep": {"t": [0.0, 0.1, 0.2, 0.3, 0.4], "probes": [0.1, 0.2, 0.8, 0.9]},
    "output": {"dir": "out"},
}

VALUE_KINDS = ("quadratic", "polynomial", "actions", "builtin")
DENSITY_KINDS = ("uniform", "triangular", "tilted", "rotation", "tabulated", "spike")
BUILTIN_VALUES = ("quadratic", "four-action", "linear")
CATALOGS = ("simple", "null", "flat")


@dataclass
class RunConfig:
    data: dict
    text: str = ""
    source: str = "<defaults>"
    overrides: dict = field(default_factory=dict)

    def section(self, name):
        return self.data[name]

    def echo(self):
        """Config as recorded in reports; the output location is left out so
        identical runs into different directories produce identical files."""
        out = copy.deepcopy(self.data)
        out.pop("output", None)
        return out


def _line_of(text, section, key):
    """Line number of ``key`` inside ``[section]`` in the raw text, if present."""
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return n
    return None


def _fail(cfg_text, section, key, message):
    raise ConfigError(message, field=f"{section}.{key}", line=_line_of(cfg_text, section, key))


def load(path=None, text=None):
    """Parse and validate a configuration file (or text)."""
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        text = raw.decode("utf-8")
    text = text or ""
    try:
        parsed = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", line=int(m.group(1)) if m else None) from None
    data = copy.deepcopy(DEFAULTS)
    for sec, body in parsed.items():
        if sec not in DEFAULTS:
            raise ConfigError(f"unknown section [{sec}]", field=sec, line=_line_of_section(text, sec))
        if not isinstance(body, dict):
            raise ConfigError("expected a table", field=sec)
        if sec in ("value", "density"):
            data[sec] = dict(body)
            data[sec].setdefault("kind", DEFAULTS[sec]["kind"])
        else:
            data[sec].update(body)
    cfg = RunConfig(data, text, source)
    validate(cfg)
    return cfg


def _line_of_section(text, sec):
    for n, line in enumerate(text.splitlines(), 1):
        if line.strip().startswith(f"[{sec}]"):
            return n
    return None


def apply_overrides(cfg, grid=None, tol=None, seed=None, out=None):
    """Command-line flags override the matching config keys."""
    if grid is not None:
        cfg.data["grid"]["menu"] = grid
        cfg.overrides["grid.menu"] = grid
    if tol is not None:
        cfg.data["tolerances"]["ic"] = tol
        cfg.overrides["tolerances.ic"] = tol
    if seed is not None:
        cfg.data["oracle"]["seed"] = seed
        cfg.overrides["oracle.seed"] = seed
    if out is not None:
        cfg.data["output"]["dir"] = str(out)
        cfg.overrides["output.dir"] = str(out)
    validate(cfg)
    return cfg


def validate(cfg):
    d, text = cfg.data, cfg.text
    for key, val in d["tolerances"].items():
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
            _fail(text, "tolerances", key, f"tolerance must be a positive number, got {val!r}")
    for key, val in d["grid"].items():
        if not isinstance(val, int) or isinstance(val, bool) or val < 64:
            _fail(text, "grid", key, f"grid size must be an integer >= 64, got {val!r}")
    br = d["lambda"]["bracket"]
    if (not isinstance(br, list) or len(br) != 2 or not all(isinstance(x, (int, float)) for x in br)
            or not 0 < br[0] < br[1] < 1):
        _fail(text, "lambda", "bracket", f"bracket must be [lo, hi] with 0 < lo < hi < 1, got {br!r}")
    o = d["oracle"]
    for key in ("types", "budget", "restarts", "seed", "workers", "three_signal_types"):
        if not isinstance(o[key], int) or isinstance(o[key], bool) or o[key] < (0 if key == "seed" else 1):
            _fail(text, "oracle", key, f"expected a positive integer, got {o[key]!r}")
    for key in ("noise_step", "three_signal_step"):
        if not isinstance(o[key], (int, float)) or not 0 < o[key] < 1:
            _fail(text, "oracle", key, f"step must lie in (0, 1), got {o[key]!r}")
    if not 0 <= o["lo"] < o["hi"] <= 1:
        _fail(text, "oracle", "lo", "type range must satisfy 0 <= lo < hi <= 1")
    if o["catalog"] not in CATALOGS:
        _fail(text, "oracle", "catalog", f"catalog must be one of {CATALOGS}")
    ts = d["sweep"]["t"]
    if not isinstance(ts, list) or not ts or not all(isinstance(x, (int, float)) for x in ts):
        _fail(text, "sweep", "t", "t must be a non-empty list of numbers")
    # resolve families now so errors surface at load time
    build_value(cfg)
    build_density(cfg)


def build_value(cfg):
    v, text = cfg.data["value"], cfg.text
    kind = v.get("kind")
    try:
        if kind == "quadratic":
            return core.quadratic_value(float(v.get("scale", 1.0)))
        if kind == "polynomial":
            if "coefficients" not in v:
                _fail(text, "value", "coefficients", "polynomial value needs 'coefficients'")
            return core.polynomial_value(v["coefficients"])
        if kind == "actions":
            if "actions" not in v:
                _fail(text, "value", "actions", "action-table value needs 'actions'")
            return core.value_from_actions(v["actions"])
        if kind == "builtin":
            name = v.get("name")
            if name == "quadratic":
                return core.quadratic_value()
            if name == "four-action":
                return core.value_from_actions(core.four_action_table())
            if name == "linear":
                return core.polynomial_value([0.0, 1.0])
            _fail(text, "value", "name", f"unknown builtin {name!r}; choose from {BUILTIN_VALUES}")
    except DomainError as exc:
        _fail(text, "value", "kind", str(exc))
    _fail(text, "value", "kind", f"unknown value kind {kind!r}; choose from {VALUE_KINDS}")


def build_density(cfg):
    from .comparative import rotation_density

    d, text = cfg.data["density"], cfg.text
    kind = d.get("kind")
    try:
        if kind == "uniform":
            return densities.uniform()
        if kind == "triangular":
            return densities.triangular()
        if kind == "tilted":
            return densities.tilted(float(d.get("slope", 0.0)))
        if kind == "spike":
            return densities.spike(float(d.get("center", 0.9)), float(d.get("width", 0.02)),
                                   float(d.get("height", 30.0)))
        if kind == "tabulated":
            if "points" not in d:
                _fail(text, "density", "points", "tabulated density needs 'points'")
            pts = d["points"]
            return densities.tabulated([p[0] for p in pts], [p[1] for p in pts])
        if kind == "rotation":
            base = d.get("base", "uniform")
            if base not in ("uniform", "triangular"):
                _fail(text, "density", "base", "rotation base must be 'uniform' or 'triangular'")
            b = densities.uniform() if base == "uniform" else densities.triangular()
            return rotation_density(b, float(d.get("t", 0.0)))
    except DomainError as exc:
        key = "t" if kind == "rotation" else "kind"
        _fail(text, "density", key, str(exc))
    _fail(text, "density", "kind", f"unknown density kind {kind!r}; choose from {DENSITY_KINDS}")


def density_family(cfg):
    """Base density for sweeps (rotation base, or the density itself)."""
    d = cfg.data["density"]
    if d.get("kind") == "rotation":
        return densities.uniform() if d.get("base", "uniform") == "uniform" else densities.triangular()
    return build_density(cfg)
