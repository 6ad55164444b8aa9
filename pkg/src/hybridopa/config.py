"""Scenario files: JSON text validated against a published schema.

A scenario is accepted from a file path, a shipped preset name or inline
JSON text.  Loading runs three distinguishable stages: parse
(ConfigParseError with line/column), schema (ConfigSchemaError with the
offending field path) and physics validation (ValidationError or
BelowThresholdViolation from the model constructors).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
from scipy.constants import c as SPEED_OF_LIGHT

from .compound_cavity import calibrate_equivalent_cavity
from .errors import ConfigParseError, ConfigSchemaError, ValidationError
from .model_params import (CavityKind, CavityModel, GridSpec, MirrorSet, PumpDrive,
                           SqueezedInput, physical_to_units)


def _package_file(*parts):
    return resources.files("hybridopa").joinpath(*parts)


def config_schema():
    return json.loads(_package_file("schemas", "config.schema.json").read_text())


def report_schema():
    return json.loads(_package_file("schemas", "report.schema.json").read_text())


def preset_names():
    names = [p.name[:-5] for p in _package_file("presets").iterdir()
             if p.name.endswith(".json")]
    return sorted(names)


def preset_text(name):
    f = _package_file("presets", f"{name}.json")
    if not f.is_file():
        raise FileNotFoundError(f"no preset named {name!r}")
    return f.read_text()


@dataclass(frozen=True)
class AnalysisSettings:
    min_prominence_db: float = 1e-3
    f_grid: tuple | None = None
    eps_db: float = 0.01
    zoom: float = 0.3
    zoom_n: int = 6001
    quadrature: str = "X"


@dataclass(frozen=True)
class OracleSettings:
    n_traj: int = 512
    decay_times: float = 40.0
    n_segments: int = 7
    batch: int = 256
    max_rel_stderr: float = 0.03
    n_sigma: float = 3.0
    closed_form_rtol: float = 1e-10
    monte_carlo: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    cavity: CavityModel
    pumps: tuple
    squeeze: SqueezedInput
    grid: GridSpec
    name: str = "scenario"
    description: str = ""
    quadratures: tuple = ("X", "Y")
    prefix: str | None = None
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    seed: int = 0

    @property
    def file_prefix(self):
        return self.prefix or self.name

    def to_dict(self):
        """Plain JSON-ready form; ``load_config`` of its dump returns an equal value."""
        m = self.cavity.mirrors
        cav = {"kind": self.cavity.kind.value,
               "t1": m.t1, "t2": m.t2, "t3": m.t3, "r1": m.r1, "r2": m.r2, "r3": m.r3,
               "tau": self.cavity.tau, "length": self.cavity.length,
               "gamma_c": self.cavity.gamma_c, "gamma_0": self.cavity.gamma_0,
               "gamma_out": self.cavity.gamma_out}
        pump = {"f": [p.f for p in self.pumps], "theta": self.pumps[0].theta}
        for key in ("gamma_p", "g"):
            v = getattr(self.pumps[0], key)
            if v is not None:
                pump[key] = v
        a = self.analysis
        analysis = {"min_prominence_db": a.min_prominence_db, "eps_db": a.eps_db,
                    "zoom": a.zoom, "zoom_n": a.zoom_n, "quadrature": a.quadrature}
        if a.f_grid is not None:
            analysis["f_grid"] = list(a.f_grid)
        out = {
            "name": self.name,
            "description": self.description,
            "seed": self.seed,
            "cavity": cav,
            "pump": pump,
            "input": {"s": self.squeeze.s},
            "grid": {"delta_min": self.grid.delta_min, "delta_max": self.grid.delta_max,
                     "n": self.grid.n, "omega": self.grid.omega, "units": "dimensionless"},
            "output": {"quadratures": list(self.quadratures)},
            "analysis": analysis,
            "oracle": dict(vars(self.oracle)),
        }
        if self.prefix is not None:
            out["output"]["prefix"] = self.prefix
        return out

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _parse(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})",
                               line=exc.lineno, column=exc.colno) from exc


def _check_schema(doc):
    validator = jsonschema.Draft202012Validator(config_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        path = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigSchemaError(f"schema error at {path}: {err.message}", path=path)


def _build_cavity(c):
    kind = CavityKind(c["kind"])
    t1, t3 = c["t1"], c["t3"]
    # without the middle mirror the front loop is transparent
    t2 = c.get("t2", 1.0 if kind is CavityKind.SINGLE else None)
    if t2 is None:
        raise ValidationError("a hybrid cavity needs t2")
    mirrors = MirrorSet(
        c.get("r1", math.sqrt(1 - t1 * t1)), t1,
        c.get("r2", math.sqrt(1 - t2 * t2)), t2,
        c.get("r3", math.sqrt(1 - t3 * t3)), t3)
    has_split = "splitting_mhz" in c
    if has_split and ("tau" in c or "length" in c):
        raise ValidationError("give either splitting_mhz or tau/length, not both")
    if has_split:
        length, tau = calibrate_equivalent_cavity(c["splitting_mhz"] * 1e6,
                                                  c.get("phase_ratio", 0.5))
    else:
        if "phase_ratio" in c:
            raise ValidationError("phase_ratio only applies together with splitting_mhz")
        if "tau" not in c:
            raise ValidationError("cavity needs tau (or splitting_mhz)")
        tau = c["tau"]
        length = c.get("length", 0.5 * SPEED_OF_LIGHT * tau)
    return CavityModel(kind, mirrors, tau, length, c.get("gamma_c", 1.0),
                       c.get("gamma_0", 0.0), c.get("gamma_out"))


def _build_grid(g, tau):
    lo, hi = g["delta_min"], g["delta_max"]
    omega = g.get("omega", 0.0)
    if g.get("units", "dimensionless") == "MHz":
        lo, hi, omega = (physical_to_units(v * 1e6, tau) for v in (lo, hi, omega))
    return GridSpec(lo, hi, g["n"], omega)


def config_from_dict(doc) -> ScenarioConfig:
    _check_schema(doc)
    cavity = _build_cavity(doc["cavity"])
    p = doc["pump"]
    fs = p["f"] if isinstance(p["f"], list) else [p["f"]]
    pumps = tuple(PumpDrive(f, p.get("theta", 0.0), p.get("gamma_p"), p.get("g")) for f in fs)
    squeeze = SqueezedInput(doc.get("input", {}).get("s", 0.0))
    grid = _build_grid(doc["grid"], cavity.tau)
    out = doc.get("output", {})
    a = dict(doc.get("analysis", {}))
    if "f_grid" in a:
        a["f_grid"] = tuple(float(f) for f in a["f_grid"])
        for f in a["f_grid"]:
            PumpDrive(f)
    return ScenarioConfig(
        cavity=cavity, pumps=pumps, squeeze=squeeze, grid=grid,
        name=doc.get("name", "scenario"), description=doc.get("description", ""),
        quadratures=tuple(out.get("quadratures", ["X", "Y"])), prefix=out.get("prefix"),
        analysis=AnalysisSettings(**a), oracle=OracleSettings(**doc.get("oracle", {})),
        seed=doc.get("seed", 0))


def load_config(source) -> ScenarioConfig:
    """Load from a path, a preset name, or inline JSON text."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        if path.is_file():
            text = path.read_text()
        elif isinstance(source, str) and source in preset_names():
            text = preset_text(source)
        else:
            raise FileNotFoundError(f"no config file or preset named {str(source)!r}")
    else:
        text = source
    return config_from_dict(_parse(text))
