"""Scenario configuration files.

A config is one YAML document with four optional sections::

    scenario:  {start_year, pre_shock_years, horizon_years, burn_in_quarters, inventory}
    economy:   any EconomyConfig field
    hazard:    any HazardSettings field
    relief:    {moderate_cap, severe_cap, severe_threshold, disbursement_profile}

Missing entries take their defaults. ``inventory`` is a path to a cell
inventory CSV, resolved relative to the config file.
"""

from __future__ import annotations

import hashlib
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from cataclysm.damage import ReliefPolicy, ReliefRule
from cataclysm.economy import EconomyConfig
from cataclysm.errors import ConfigError, InvalidParameterError, NonProductiveEconomyError
from cataclysm.runner import HazardSettings, ScenarioConfig

SCENARIO_KEYS = ("start_year", "pre_shock_years", "horizon_years", "burn_in_quarters", "inventory")
RELIEF_KEYS = ("moderate_cap", "severe_cap", "severe_threshold", "disbursement_profile")
SECTIONS = ("scenario", "economy", "hazard", "relief")


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def to_dict(cfg: ScenarioConfig) -> dict:
    """Plain nested dict with every parameter spelled out."""
    return {
        "scenario": {k: getattr(cfg, k) for k in SCENARIO_KEYS},
        "economy": {k: _plain(v) for k, v in cfg.economy.to_dict().items()},
        "hazard": {f.name: _plain(getattr(cfg.hazard, f.name)) for f in fields(HazardSettings)},
        "relief": {
            "moderate_cap": cfg.relief.moderate_cap,
            "severe_cap": cfg.relief.severe_cap,
            "severe_threshold": cfg.relief.severe_threshold,
            "disbursement_profile": list(cfg.relief.disbursement_profile),
        },
    }


def _check_type(section: str, key: str, value, default):
    """Reject values whose kind differs from the default's."""
    where = f"{section}.{key}"
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int) and not isinstance(default, bool):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, (np.ndarray, list, tuple)):
        ok = isinstance(value, (list, tuple))
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}", key=where)


def _section(data: dict, name: str) -> dict:
    sec = data.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping", key=name)
    return sec


def from_dict(data: dict, base_dir: str | Path | None = None) -> ScenarioConfig:
    """Build and validate a ScenarioConfig; errors name the offending key."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections", key="<root>")
    for k in data:
        if k not in SECTIONS:
            raise ConfigError(f"unknown section {k!r}", key=str(k))
    defaults = ScenarioConfig()

    scen = _section(data, "scenario")
    kw = {}
    for k, v in scen.items():
        if k not in SCENARIO_KEYS:
            raise ConfigError(f"unknown key scenario.{k}", key=f"scenario.{k}")
        if k == "inventory":
            if v is not None and not isinstance(v, str):
                raise ConfigError("scenario.inventory must be a path", key="scenario.inventory")
            if v is not None:
                p = Path(v)
                if not p.is_absolute() and base_dir is not None:
                    p = Path(base_dir) / p
                if not p.is_file():
                    raise ConfigError(f"inventory file {str(p)!r} not found", key="scenario.inventory")
                v = str(p.resolve())
        else:
            _check_type("scenario", k, v, getattr(defaults, k))
            if v < 0 or (k == "horizon_years" and v < 1):
                raise ConfigError(f"scenario.{k} out of range: {v}", key=f"scenario.{k}")
        kw[k] = v

    eco_data = _section(data, "economy")
    eco_defaults = EconomyConfig()
    for k, v in eco_data.items():
        if not hasattr(eco_defaults, k):
            raise ConfigError(f"unknown key economy.{k}", key=f"economy.{k}")
        _check_type("economy", k, v, getattr(eco_defaults, k))
    try:
        economy = EconomyConfig.from_dict(dict(eco_data)).validate()
    except ConfigError as exc:
        raise ConfigError(f"economy.{exc.key}: {exc}", key=f"economy.{exc.key}") from exc
    except NonProductiveEconomyError as exc:
        raise ConfigError(f"economy.technical_coefficients: {exc}", key="economy.technical_coefficients") from exc

    haz_data = _section(data, "hazard")
    hdefaults = HazardSettings()
    for k, v in haz_data.items():
        if not hasattr(hdefaults, k):
            raise ConfigError(f"unknown key hazard.{k}", key=f"hazard.{k}")
        _check_type("hazard", k, v, getattr(hdefaults, k))
    haz_kw = dict(haz_data)
    if "calibration_targets" in haz_kw:
        try:
            haz_kw["calibration_targets"] = tuple((float(t), float(y)) for t, y in haz_kw["calibration_targets"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("hazard.calibration_targets must be [T, loss] pairs",
                              key="hazard.calibration_targets") from exc
    hazard = HazardSettings(**haz_kw)
    if hazard.copula_family != "gumbel":
        raise ConfigError(f"unknown copula family {hazard.copula_family!r}", key="hazard.copula_family")
    if hazard.dependence_slope < 0:
        raise ConfigError("hazard.dependence_slope must be >= 0", key="hazard.dependence_slope")
    if hazard.calibration_draws < 1:
        raise ConfigError("hazard.calibration_draws must be positive", key="hazard.calibration_draws")

    rel_data = _section(data, "relief")
    rdefaults = ReliefRule()
    for k, v in rel_data.items():
        if k not in RELIEF_KEYS:
            raise ConfigError(f"unknown key relief.{k}", key=f"relief.{k}")
        _check_type("relief", k, v, getattr(rdefaults, k))
    rel_kw = dict(rel_data)
    if "disbursement_profile" in rel_kw:
        rel_kw["disbursement_profile"] = tuple(float(v) for v in rel_kw["disbursement_profile"])
    relief = ReliefRule(**rel_kw)
    for key, cap in (("moderate_cap", relief.moderate_cap), ("severe_cap", relief.severe_cap)):
        try:
            ReliefPolicy(cap, relief.disbursement_profile)
        except InvalidParameterError as exc:
            bad = key if not 0 <= cap <= 1 else "disbursement_profile"
            raise ConfigError(f"relief.{bad}: {exc}", key=f"relief.{bad}") from exc

    return ScenarioConfig(economy=economy, hazard=hazard, relief=relief, **kw)


def loads(text: str, base_dir: str | Path | None = None) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}", key="<syntax>") from exc
    return from_dict(data, base_dir)


def load_config(path: str | Path | None) -> ScenarioConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return ScenarioConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found", key="--config")
    return loads(p.read_text(), base_dir=p.parent)


def dumps(cfg: ScenarioConfig) -> str:
    """Canonical YAML text; floats are written with full precision."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=True, default_flow_style=None, width=100)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()
