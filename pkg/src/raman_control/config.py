"""Run configuration: TOML documents with unit-suffixed quantities.

Every physical quantity is written as a string carrying its unit, e.g.
``fwhm = "10 fs"`` or ``energy = "7.1 uJ"``; bare numbers are rejected for
those keys.  Values are converted to the package's working units (eV, fs,
W/cm^2, uJ, um, rad, a.u.) when the configuration is resolved.
"""
import copy
from dataclasses import dataclass
import math
from pathlib import Path
import re

import tomli
import tomli_w

from .errors import ConfigError
from .krotov import DEFAULT_AMPLITUDES, KrotovConfig, TargetSpec, flattop_shape, sin2_shape
from .model import PRESETS, build_from_config, load_model, neon_preset_from_doc
from .pulses import GaussianPulseSpec, Pulse, TimeGrid, sample_gaussian, superpose
from .units import intensity_from_pulse_energy, intensity_to_field_amplitude

# unit suffix -> (dimension, factor to working unit)
UNITS = {
    "eV": ("energy", 1.0),
    "meV": ("energy", 1e-3),
    "as": ("time", 1e-3),
    "fs": ("time", 1.0),
    "ps": ("time", 1e3),
    "Wcm2": ("intensity", 1.0),
    "nJ": ("pulse_energy", 1e-3),
    "uJ": ("pulse_energy", 1.0),
    "mJ": ("pulse_energy", 1e3),
    "nm": ("length", 1e-3),
    "um": ("length", 1.0),
    "mm": ("length", 1e3),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
    "au": ("au", 1.0),
}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z0-9]+)\s*$")

PULSE_KEYS = {
    "carrier": "energy",
    "center": "time",
    "fwhm": "time",
    "cep": "angle",
    "energy": "pulse_energy",
    "intensity": "intensity",
    "amplitude": "au",
    "spot": "length",
}

# dotted key -> dimension for fixed sections; "pulse" tables use PULSE_KEYS
DIMENSIONS = {
    "grid.t_start": "time",
    "grid.t_end": "time",
    "grid.dt": "time",
    "target.phase": "angle",
    "target.omega": "energy",
    "target.t_origin": "time",
    "krotov.t_rise": "time",
    "krotov.t_on": "time",
    "krotov.t_off": "time",
    "krotov.field_cap": "au",
}

DEFAULT_PULSES = ("pump", "stokes")


def parse_quantity(value, key, dimension=None):
    """``"7.1 uJ"`` -> 7.1 (in the working unit of its dimension)."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ConfigError(f"expected a quantity with a unit suffix, got {value!r}", key=key)
    m = _QTY.match(value)
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r} (expected e.g. '10 fs')", key=key)
    number, unit = m.groups()
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {unit!r}; known: {', '.join(UNITS)}", key=key)
    dim, factor = UNITS[unit]
    if dimension is not None and dim != dimension:
        raise ConfigError(f"{value!r} is a {dim}, expected a {dimension}", key=key)
    return float(number) * factor


def unit_of(value):
    m = _QTY.match(value) if isinstance(value, str) else None
    return m.group(2) if m else None


def format_quantity(x, unit):
    return f"{x!r} {unit}"


def is_quantity(value):
    return isinstance(value, str) and bool(_QTY.match(value)) and unit_of(value) in UNITS


def parse_quantities(value, key):
    """Scenario parameter: quantity strings become floats, lists elementwise."""
    if isinstance(value, list):
        return [parse_quantities(v, f"{key}[{i}]") for i, v in enumerate(value)]
    if is_quantity(value):
        return parse_quantity(value, key)
    return value


def _parse_literal(text):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def _get(doc, parts):
    node = doc
    for p in parts:
        if not isinstance(node, dict) or p not in node:
            return None
        node = node[p]
    return node


def apply_override(doc, assignment):
    """Apply ``dotted.key=value`` in place.

    A bare number assigned to a key that already holds a quantity inherits
    that quantity's unit (``pump.fwhm=50`` on ``"10 fs"`` gives ``"50 fs"``).
    """
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value", key=assignment)
    key, text = (s.strip() for s in assignment.split("=", 1))
    parts = key.split(".")
    if not key or any(not p for p in parts):
        raise ConfigError(f"malformed key {key!r}", key=key)
    value = _parse_literal(text)
    old = _get(doc, parts)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        unit = unit_of(old)
        dim = _dimension_for(parts)
        if unit is not None:
            value = format_quantity(value, unit)
        elif dim is not None:
            raise ConfigError(f"{key} needs a unit suffix (a {dim})", key=key)
    node = doc
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"{p!r} is not a table", key=key)
        node = nxt
    node[parts[-1]] = value
    return doc


def _dimension_for(parts):
    key = ".".join(parts)
    if key in DIMENSIONS:
        return DIMENSIONS[key]
    if len(parts) == 2 and parts[1] in PULSE_KEYS and parts[0] not in ("grid", "target", "krotov", "run",
                                                                       "model", "scenario", "initial"):
        return PULSE_KEYS[parts[1]]
    return None


@dataclass
class RunConfig:
    doc: dict
    source: str = None

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {str(path)!r} not found", key="--config") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}", key="--config") from None
        cfg = cls(doc, str(path))
        # model files are resolved relative to the config file
        ref = cfg.get("model.ref")
        if isinstance(ref, str) and not ref.startswith("neon_") and not Path(ref).is_absolute():
            cfg.doc["model"]["ref"] = str((path.parent / ref).resolve())
        return cfg

    @classmethod
    def empty(cls):
        return cls({})

    def copy(self):
        return RunConfig(copy.deepcopy(self.doc), self.source)

    def override(self, assignments):
        for a in assignments or ():
            apply_override(self.doc, a)
        return self

    def get(self, key, default=None):
        v = _get(self.doc, key.split("."))
        return default if v is None else v

    def quantity(self, key, default=None, dimension=None):
        v = self.get(key)
        if v is None:
            return default
        return parse_quantity(v, key, dimension or _dimension_for(key.split(".")))

    def number(self, key, default=None, kind=float):
        v = self.get(key)
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", key=key)
        if kind is int and int(v) != v:
            raise ConfigError(f"expected an integer, got {v!r}", key=key)
        return kind(v)

    def section(self, name):
        v = self.get(name, {})
        if not isinstance(v, dict):
            raise ConfigError("expected a table", key=name)
        return v

    def pulse_names(self):
        names = self.get("run.pulses")
        if names is None:
            return [n for n in DEFAULT_PULSES if n in self.doc]
        return list(names)

    def dumps(self):
        return tomli_w.dumps(self.doc)

    def save(self, path):
        with open(path, "wb") as fh:
            tomli_w.dump(self.doc, fh)


# resolution into domain objects ------------------------------------------

def resolve_model(cfg):
    meta = cfg.section("model")
    if "ref" in meta:
        return load_model(str(meta["ref"]))
    if "preset" in meta:
        if meta["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {meta['preset']!r}; available: {', '.join(PRESETS)}",
                              key="model.preset")
        return neon_preset_from_doc(cfg.doc)
    if "states" in cfg.doc:
        return build_from_config(cfg.doc)
    return None


def resolve_grid(cfg, required=True):
    if "grid" not in cfg.doc:
        if required:
            raise ConfigError("a [grid] table with t_start, t_end and dt is required", key="grid")
        return None
    vals = {}
    for k in ("t_start", "t_end", "dt"):
        v = cfg.quantity(f"grid.{k}")
        if v is None:
            raise ConfigError("missing entry", key=f"grid.{k}")
        vals[k] = v
    if not vals["dt"] > 0 or not vals["t_end"] > vals["t_start"]:
        raise ConfigError("need dt > 0 and t_end > t_start", key="grid")
    return TimeGrid.from_span(vals["t_start"], vals["t_end"], vals["dt"])


def resolve_pulse_spec(cfg, name):
    table = cfg.section(name)
    unknown = set(table) - set(PULSE_KEYS)
    if unknown:
        raise ConfigError(f"unknown pulse keys {sorted(unknown)}; known: {sorted(PULSE_KEYS)}", key=name)
    q = {k: cfg.quantity(f"{name}.{k}", dimension=d) for k, d in PULSE_KEYS.items()}
    for req in ("carrier", "fwhm"):
        if q[req] is None:
            raise ConfigError("missing entry", key=f"{name}.{req}")
    given = [k for k in ("amplitude", "intensity", "energy") if q[k] is not None]
    if len(given) != 1:
        raise ConfigError("give exactly one of amplitude, intensity, energy", key=name)
    if q["fwhm"] <= 0:
        raise ConfigError("must be positive", key=f"{name}.fwhm")
    if q["amplitude"] is not None:
        amp = q["amplitude"]
    else:
        intensity = q["intensity"]
        if intensity is None:
            spot = q["spot"] if q["spot"] is not None else 10.0
            try:
                intensity = intensity_from_pulse_energy(q["energy"], q["fwhm"], spot)
            except ValueError as exc:
                raise ConfigError(str(exc), key=f"{name}.energy") from None
        if intensity < 0:
            raise ConfigError("must be non-negative", key=f"{name}.intensity")
        amp = intensity_to_field_amplitude(intensity)
    return GaussianPulseSpec(amp, q["carrier"], q["center"] or 0.0, q["cep"] or 0.0, q["fwhm"])


def resolve_pulse(cfg, grid):
    names = cfg.pulse_names()
    if not names:
        return Pulse.zeros(grid)
    return superpose([sample_gaussian(resolve_pulse_spec(cfg, n), grid) for n in names])


def resolve_initial_state(cfg, model):
    label = cfg.get("initial.state")
    if label is None:
        return model.ground_state()
    try:
        return model.basis_vector(str(label))
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), key="initial.state") from None


def resolve_target(cfg, model):
    kind = cfg.get("target.kind", "pure")
    label = cfg.get("target.state", model.target_label)
    if label is None:
        raise ConfigError("no target state given and the model has none", key="target.state")
    if label not in model.labels:
        raise ConfigError(f"unknown state {label!r}", key="target.state")
    if kind == "pure":
        return TargetSpec.pure(label)
    if kind != "superposition":
        raise ConfigError(f"unknown target kind {kind!r} (pure or superposition)", key="target.kind")
    ref = cfg.get("target.reference")
    if ref is None:
        ref = model.labels[int(model.ground_state().real.argmax())]
    if ref not in model.labels:
        raise ConfigError(f"unknown state {ref!r}", key="target.reference")
    amps = tuple(cfg.get("target.amplitudes", list(DEFAULT_AMPLITUDES)))
    if len(amps) != 2:
        raise ConfigError("expected two amplitudes", key="target.amplitudes")
    return TargetSpec.superposition(cfg.quantity("target.phase", 0.0), label, ref, amps)


def resolve_krotov(cfg, grid):
    k = cfg.section("krotov")
    known = {"lambda", "iterations", "stop_delta_j", "update_form", "shape", "t_rise", "t_on", "t_off",
             "field_cap", "adapt_lambda"}
    unknown = set(k) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", key="krotov")
    t_on = cfg.quantity("krotov.t_on")
    t_off = cfg.quantity("krotov.t_off")
    kind = k.get("shape", "flattop")
    if kind == "flattop":
        shape = flattop_shape(grid, cfg.quantity("krotov.t_rise", 3.0), t_on, t_off)
    elif kind == "sin2":
        shape = sin2_shape(grid, t_on, t_off)
    else:
        raise ConfigError(f"unknown shape {kind!r} (flattop or sin2)", key="krotov.shape")
    try:
        return KrotovConfig(
            lambda_=cfg.number("krotov.lambda", 1.0),
            max_iterations=cfg.number("krotov.iterations", 100, int),
            stop_delta_j=cfg.number("krotov.stop_delta_j", 0.0),
            shape=shape,
            update_form=k.get("update_form", "multiplicative"),
            field_cap=cfg.quantity("krotov.field_cap", 10.0),
            adapt_lambda=bool(k.get("adapt_lambda", True)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key="krotov") from None
