"""Run configuration: strict INI file, command-line overrides, config hash.

Schema (every key optional, defaults shown by ``RunConfig()``)::

    [grid]        dim, cells
    [angular]     kind, order
    [kinetic]     eps (comma list, strictly decreasing), advection, cfl, dt, startup
    [fluid]       cfl, reconstruction
    [radiation]   c_planck
    [run]         t_end, snapshot_times, output_dir, seed, workers
    [diagnostics] layer_window, flux_time, layer_span, layer_steps_per_eps2,
                  layer_snapshots_per_eps2
    [preset]      name, plus any parameter of the named preset

Unknown sections or keys are rejected. ``RADLIMIT_OUTPUT_DIR`` overrides
``run.output_dir``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..angular import QUADRATURE_KINDS, build_quadrature
from ..errors import ConfigurationError, ContractViolation
from ..euler import RECONSTRUCTIONS
from ..mesh import PeriodicGrid
from ..transport import ADVECTION_MODES, EpsilonParams
from .presets import PRESETS, preset_parameters

OUTPUT_DIR_ENV = "RADLIMIT_OUTPUT_DIR"
SCHEMA_VERSION = 1
DEFAULT_EPS = (0.1, 0.05, 0.025, 0.0125)


@dataclass
class RunConfig:
    dim: int = 1
    cells: int = 64
    quadrature_kind: str = "octahedral-symmetric"
    quadrature_order: int = 7
    eps: tuple = DEFAULT_EPS
    advection: str = "ap"
    cfl: float = 0.5
    dt: float | None = None
    startup: float | None = 0.05
    fluid_cfl: float = 0.5
    reconstruction: str = "first-order"
    c_planck: float = 1.0
    t_end: float = 0.5
    snapshot_times: tuple = ()
    output_dir: str = "radlimit-out"
    seed: int = 0
    workers: int = 1
    layer_window: float = 10.0
    flux_time: float = 0.25
    layer_span: float = 20.0
    layer_steps_per_eps2: float = 50.0
    layer_snapshots_per_eps2: int = 4
    preset: str = "smooth-1d"
    preset_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps = tuple(float(e) for e in self.eps)
        self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigurationError(msg)

        need(self.dim in (1, 2, 3), f"grid.dim must be 1, 2 or 3, got {self.dim}")
        need(self.cells >= 4, f"grid.cells must be >= 4, got {self.cells}")
        need(self.quadrature_kind in QUADRATURE_KINDS, f"angular.kind must be one of {QUADRATURE_KINDS}")
        need(len(self.eps) >= 1, "kinetic.eps must list at least one value")
        need(all(0 < e <= 1 for e in self.eps), f"kinetic.eps values must lie in (0, 1], got {self.eps}")
        need(all(a > b for a, b in zip(self.eps, self.eps[1:])), f"kinetic.eps must be strictly decreasing, got {self.eps}")
        need(self.advection in ADVECTION_MODES, f"kinetic.advection must be one of {ADVECTION_MODES}")
        need(self.cfl > 0 and self.fluid_cfl > 0, "cfl values must be positive")
        need(self.dt is None or self.dt > 0, "kinetic.dt must be positive")
        need(self.startup is None or self.startup > 0, "kinetic.startup must be positive or 'none'")
        need(self.reconstruction in RECONSTRUCTIONS, f"fluid.reconstruction must be one of {RECONSTRUCTIONS}")
        need(self.c_planck > 0, "radiation.c_planck must be positive")
        need(self.t_end > 0, f"run.t_end must be positive, got {self.t_end}")
        need(all(0 < t < self.t_end for t in self.snapshot_times), "run.snapshot_times must lie in (0, t_end)")
        need(self.workers >= 1, "run.workers must be >= 1")
        need(self.layer_window >= 0, "diagnostics.layer_window must be nonnegative")
        need(self.flux_time > 0, "diagnostics.flux_time must be positive (clipped to t_end)")
        need(self.layer_span > 1, "diagnostics.layer_span must exceed 1 (tau = 1 is probed)")
        need(self.layer_steps_per_eps2 > 0, "diagnostics.layer_steps_per_eps2 must be positive")
        need(self.layer_snapshots_per_eps2 >= 1, "diagnostics.layer_snapshots_per_eps2 must be >= 1")
        need(self.preset in PRESETS, f"unknown preset {self.preset!r}; available: {sorted(PRESETS)}")
        known = preset_parameters(self.preset)
        bad = sorted(set(self.preset_params) - set(known))
        need(not bad, f"preset {self.preset!r} has no parameters {bad}; known: {sorted(known)}")
        try:
            build_quadrature(self.quadrature_kind, self.quadrature_order)
        except ConfigurationError as exc:
            raise ConfigurationError(f"angular: {exc}") from exc

    # -- derived objects ----------------------------------------------------------

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.dim, self.cells)

    def quadrature(self):
        return build_quadrature(self.quadrature_kind, self.quadrature_order)

    def params(self, eps: float, **changes) -> EpsilonParams:
        base = dict(eps=eps, t_end=self.t_end, cfl=self.cfl, dt=self.dt, advection=self.advection, startup=self.startup)
        base.update(changes)
        try:
            return EpsilonParams(**base)
        except ContractViolation as exc:
            raise ConfigurationError(str(exc)) from exc

    def output_path(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    # -- serialization ------------------------------------------------------------

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eps"] = list(self.eps)
        d["snapshot_times"] = list(self.snapshot_times)
        return d

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form; the output directory is excluded."""
        d = self.as_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# (section, key) -> (attribute, parser)
def _float_list(text: str) -> tuple:
    if text.strip().lower() == "none":
        return ()
    items = [s.strip() for s in text.split(",") if s.strip()]
    return tuple(float(s) for s in items)


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


_SCHEMA = {
    ("grid", "dim"): ("dim", int),
    ("grid", "cells"): ("cells", int),
    ("angular", "kind"): ("quadrature_kind", str),
    ("angular", "order"): ("quadrature_order", int),
    ("kinetic", "eps"): ("eps", _float_list),
    ("kinetic", "advection"): ("advection", str),
    ("kinetic", "cfl"): ("cfl", float),
    ("kinetic", "dt"): ("dt", _optional_float),
    ("kinetic", "startup"): ("startup", _optional_float),
    ("fluid", "cfl"): ("fluid_cfl", float),
    ("fluid", "reconstruction"): ("reconstruction", str),
    ("radiation", "c_planck"): ("c_planck", float),
    ("run", "t_end"): ("t_end", float),
    ("run", "snapshot_times"): ("snapshot_times", _float_list),
    ("run", "output_dir"): ("output_dir", str),
    ("run", "seed"): ("seed", int),
    ("run", "workers"): ("workers", int),
    ("diagnostics", "layer_window"): ("layer_window", float),
    ("diagnostics", "flux_time"): ("flux_time", float),
    ("diagnostics", "layer_span"): ("layer_span", float),
    ("diagnostics", "layer_steps_per_eps2"): ("layer_steps_per_eps2", float),
    ("diagnostics", "layer_snapshots_per_eps2"): ("layer_snapshots_per_eps2", int),
    ("preset", "name"): ("preset", str),
}
SECTIONS = sorted({s for s, _ in _SCHEMA})


def _apply(values: dict, preset_params: dict, section: str, key: str, raw: str) -> None:
    section, key = section.strip().lower(), key.strip().lower()
    if section not in SECTIONS:
        raise ConfigurationError(f"unknown config section [{section}]; known: {SECTIONS}")
    if section == "preset" and key != "name":
        try:
            preset_params[key] = float(raw)
        except ValueError as exc:
            raise ConfigurationError(f"preset.{key}: expected a number, got {raw!r}") from exc
        return
    if (section, key) not in _SCHEMA:
        known = sorted(k for s, k in _SCHEMA if s == section)
        raise ConfigurationError(f"unknown key {section}.{key}; known keys in [{section}]: {known}")
    attr, parse = _SCHEMA[(section, key)]
    try:
        values[attr] = parse(raw.strip())
    except ValueError as exc:
        raise ConfigurationError(f"{section}.{key}: cannot parse {raw!r} ({exc})") from exc


def parse_config(text: str = "", overrides=()) -> RunConfig:
    """Build a RunConfig from INI text plus ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    values, preset_params = {}, {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            _apply(values, preset_params, section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override {item!r} must look like section.key=value")
        lhs, raw = item.split("=", 1)
        section, key = lhs.split(".", 1)
        _apply(values, preset_params, section, key, raw)
    return RunConfig(**values, preset_params=preset_params)


def load_config(path=None, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(path.read_text(), overrides)


def to_ini(cfg: RunConfig) -> str:
    """Inverse of ``parse_config`` (round-trips every field)."""
    out = {}
    for (section, key), (attr, _) in _SCHEMA.items():
        value = getattr(cfg, attr)
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        elif value is None:
            value = "none"
        out.setdefault(section, []).append(f"{key} = {value}")
    out["preset"].extend(f"{k} = {v!r}" for k, v in sorted(cfg.preset_params.items()))
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in out.items())
