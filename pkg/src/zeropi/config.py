"""Run configuration files.

Configs are INI files whose keys carry their unit, e.g. ``EJ_GHz`` or
``temperature_K``. Every key is checked against a schema; unknown sections
or keys are errors. A ``manifest.json`` written by a previous run can be
loaded in place of a config, which reruns exactly the echoed settings.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, UsageError
from .params import BasisSpec, CircuitParams, Cutoffs, FluxLine, NoiseAmplitudes
from .spectrum import SWEEP_PARAMETERS

TASKS = ("spectrum", "sweep", "dispersive", "coherence", "purcell", "validate")
FORMATS = ("csv", "json")
AUTO = "auto"


class ConfigError(UsageError):
    """Malformed or inconsistent configuration."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _auto_int(text: str):
    return AUTO if text.strip().lower() == AUTO else int(text)


def _auto_float(text: str):
    return AUTO if text.strip().lower() == AUTO else float(text)


def _formats(text: str):
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in items if x not in FORMATS]
    if bad or not items:
        raise ValueError(f"formats must be a non-empty subset of {FORMATS}")
    return items


def _task(text: str) -> str:
    text = text.strip()
    if text not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    return text


def _parameter(text: str) -> str:
    text = text.strip()
    if text not in SWEEP_PARAMETERS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    return text


# section -> key -> (attribute, parser, default); a default of None means required
SCHEMA = {
    "circuit": {
        "EC_GHz": ("EC", float, None),
        "ECJ_GHz": ("ECJ", float, None),
        "EJ_GHz": ("EJ", float, None),
        "EL_GHz": ("EL", float, None),
        "dC": ("dC", float, 0.0),
        "dCJ": ("dCJ", float, 0.0),
        "dEJ": ("dEJ", float, 0.0),
        "dEL": ("dEL", float, 0.0),
        "flux_Phi0": ("flux", float, 0.0),
        "ng_theta": ("ng_theta", float, 0.0),
        "temperature_K": ("temperature", float, 0.015),
        "kappa_zeta_per_s": ("kappa_zeta", float, 1e4),
    },
    "noise": {
        "A_flux_Phi0": ("A_flux", float, 1e-6),
        "A_charge": ("A_charge", float, 1e-4),
        "A_Ic": ("A_Ic", float, 1e-7),
        "fluxline_M_Phi0_per_A": ("M", float, 1000.0),
        "fluxline_R_ohm": ("R", float, 50.0),
        "omega_ir_rad_per_s": ("omega_ir", float, 2 * math.pi),
        "omega_uv_rad_per_s": ("omega_uv", float, 2 * math.pi * 3e9),
        "t_meas_s": ("t_meas", float, 1e-5),
    },
    "basis": {
        "n_theta_max": ("n_theta_max", int, 20),
        "phi_points": ("phi_points", _auto_int, AUTO),
        "phi_max_rad": ("phi_max", _auto_float, AUTO),
        "n_zeta_max": ("n_zeta_max", _auto_int, AUTO),
        "stencil_order": ("stencil_order", int, 8),
        "levels": ("levels", int, 15),
    },
    "run": {
        "task": ("task", _task, "coherence"),
        "workers": ("workers", int, 1),
        "seed": ("seed", int, 20240611),
        "include_charge": ("include_charge", _bool, False),
        "convergence_report": ("convergence_report", _bool, True),
        "convergence_threshold_GHz": ("convergence_threshold", float, 1e-6),
        "spectrum_states": ("spectrum_states", int, 30),
    },
    "sweep": {
        "parameter": ("parameter", _parameter, None),
        "start": ("start", float, None),
        "stop": ("stop", float, None),
        "points": ("points", int, None),
    },
    "output": {
        "directory": ("directory", str, "results"),
        "formats": ("formats", _formats, ("csv",)),
    },
}
REQUIRED_SECTIONS = ("circuit",)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    points: int

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class RunConfig:
    params: CircuitParams
    basis_settings: dict
    task: str
    sweep: Optional[SweepSpec]
    directory: str
    formats: tuple
    workers: int
    seed: int
    run: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def levels(self) -> int:
        return self.basis_settings["levels"]

    def basis_for(self, params: CircuitParams) -> BasisSpec:
        """Resolve ``auto`` cutoffs for the given parameters."""
        s = self.basis_settings
        auto = BasisSpec.default_for(params, n_theta_max=s["n_theta_max"], stencil_order=s["stencil_order"])
        phi_max = auto.phi_max if s["phi_max"] == AUTO else s["phi_max"]
        if s["phi_points"] == AUTO:
            points = auto.phi_points if s["phi_max"] == AUTO else int(math.ceil(2 * phi_max / 0.15)) + 1
        else:
            points = s["phi_points"]
        nz = 20 if s["n_zeta_max"] == AUTO else s["n_zeta_max"]
        return BasisSpec(n_theta_max=s["n_theta_max"], phi_points=points, phi_max=phi_max,
                         n_zeta_max=nz, stencil_order=s["stencil_order"])

    @property
    def n_zeta_max(self) -> Optional[int]:
        """Explicit Fock cutoff, or None for the thermal default."""
        value = self.basis_settings["n_zeta_max"]
        return None if value == AUTO else value

    def with_task(self, task: str) -> "RunConfig":
        from dataclasses import replace
        raw = {k: dict(v) for k, v in self.raw.items()}
        raw.setdefault("run", {})["task"] = task
        return replace(self, task=task, raw=raw)

    def to_ini(self) -> str:
        lines = []
        for section, values in self.raw.items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in values.items())
            lines.append("")
        return "\n".join(lines)


def _text(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(value)
    if isinstance(value, bool):
        return "yes" if value else "no"
    return repr(value) if isinstance(value, float) else str(value)


def _parse_sections(sections: dict) -> RunConfig:
    unknown = set(sections) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    for name in REQUIRED_SECTIONS:
        if name not in sections:
            raise ConfigError(f"missing section [{name}]")
    values = {}
    raw = {}
    for section, schema in SCHEMA.items():
        given = sections.get(section)
        if given is None:
            if section == "sweep":
                continue
            given = {}
        extra = set(given) - set(schema)
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {sorted(extra)}")
        out = {}
        for key, (attr, parse, default) in schema.items():
            if key in given:
                text = str(given[key]).strip()
                try:
                    out[attr] = parse(text)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from None
            elif default is None:
                raise ConfigError(f"[{section}] missing required key {key}")
            else:
                out[attr] = default
        values[section] = out
        raw[section] = {k: str(given[k]).strip() if k in given else _text(schema[k][2]) for k in schema}

    c, n, b, r = values["circuit"], values["noise"], values["basis"], values["run"]
    try:
        params = CircuitParams(
            **c,
            noise_amplitudes=NoiseAmplitudes(n["A_flux"], n["A_charge"], n["A_Ic"]),
            fluxline=FluxLine(n["M"], n["R"]),
            cutoffs=Cutoffs(n["omega_ir"], n["omega_uv"], n["t_meas"]),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if b["levels"] < 2:
        raise ConfigError("[basis] levels must be >= 2")
    if b["n_zeta_max"] != AUTO and b["n_zeta_max"] < 0:
        raise ConfigError("[basis] n_zeta_max must be >= 0")
    if r["workers"] < 1:
        raise ConfigError("[run] workers must be >= 1")
    sweep = None
    if "sweep" in values:
        s = values["sweep"]
        if s["points"] < 1 or (s["points"] > 1 and not s["stop"] > s["start"]):
            raise ConfigError("[sweep] needs points >= 1 and stop > start")
        sweep = SweepSpec(**s)
    if r["task"] == "sweep" and sweep is None:
        raise ConfigError("task 'sweep' requires a [sweep] section")
    config = RunConfig(params, b, r["task"], sweep, values["output"]["directory"],
                       values["output"]["formats"], r["workers"], r["seed"], r, raw)
    # resolve the basis once so that bad cutoffs fail before any computation
    try:
        config.basis_for(params)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return config


def parse_config(text: str) -> RunConfig:
    """Parse INI text (or a manifest JSON document) into a validated RunConfig."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        sections = doc.get("config", {}).get("sections") if isinstance(doc, dict) else None
        if not isinstance(sections, dict):
            raise ConfigError("JSON input must be a manifest with a config echo")
        return _parse_sections(sections)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (EJ_GHz vs ej_ghz)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return _parse_sections({s: dict(parser[s]) for s in parser.sections()})


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def bundled_config(name: str) -> Path:
    """Path of a shipped config (``ps1``, ``ps2`` or ``ps3``)."""
    path = Path(__file__).with_name("configs") / f"{name.lower()}.config"
    if not path.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return path
