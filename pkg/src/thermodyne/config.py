"""Experiment configuration: a flat, strictly-validated key=value file.

Example::

    # two-level detector in a thermal bath
    preset   = detector
    kappa    = 1.0
    nbar     = 1.0
    rho0     = excited
    dt       = 0.001
    T        = 4.0
    ensemble = 2000
    seed     = 12345
    variant  = corrected

Unknown keys are hard errors; values are type-checked.  The resolved
configuration has a canonical serialization whose SHA-256 identifies the run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields

import numpy as np

from .model import (DetectorPreset, SystemModel, build_detector,
                    excited_projector, ground_projector, plus_state)


class ConfigError(ValueError):
    """Malformed or out-of-range experiment configuration."""


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


@dataclass
class ExperimentConfig:
    # model
    preset: str = "detector"
    kappa: float = 1.0
    omega: float = 0.0
    beta: float | None = None
    nbar: float = 0.0
    L_json: str | None = None
    H_json: str | None = None
    rho0: str = "excited"
    # grids and ensembles
    dt: float = 1e-3
    T: float = 4.0
    ensemble: int = 2000
    seed: int = 12345
    variant: str = "corrected"
    stride: int = 40
    save_trajectories: bool = False
    # collision-model oracle
    trunc: int = 4
    tau: float = 0.01
    oracle_T: float = 1.0
    oracle_ensemble: int = 500
    # unraveling
    msamples: int = 500
    # identity checks
    identity_samples: int = 100

    def validate(self) -> None:
        if self.preset not in ("detector", "custom"):
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.preset == "custom" and (self.L_json is None or self.H_json is None):
            raise ConfigError("custom preset requires L_json and H_json")
        if self.kappa <= 0:
            raise ConfigError(f"kappa must be > 0, got {self.kappa}")
        if self.nbar < 0:
            raise ConfigError(f"nbar must be >= 0, got {self.nbar}")
        if self.beta is not None and self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.beta is not None and self.omega <= 0:
            raise ConfigError("beta requires omega > 0 to define an occupation")
        if self.rho0 not in ("excited", "ground", "plus", "maxmixed"):
            raise ConfigError(f"unknown rho0 {self.rho0!r}")
        for name in ("dt", "T", "tau", "oracle_T"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("ensemble", "stride", "trunc", "msamples",
                     "identity_samples", "oracle_ensemble"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.variant not in ("paper", "corrected", "both"):
            raise ConfigError(
                f"variant must be paper, corrected, or both; got {self.variant!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")

    # -- resolution -----------------------------------------------------

    def build_model(self) -> SystemModel:
        if self.preset == "detector":
            return build_detector(DetectorPreset(
                kappa=self.kappa, omega=self.omega,
                beta=self.beta, nbar=None if self.beta is not None else self.nbar))
        L = _matrix_from_json(self.L_json, "L_json")
        H = _matrix_from_json(self.H_json, "H_json")
        nbar = self.nbar
        if self.beta is not None:
            from .model import ThermalParams, nbar_from_thermal
            nbar = nbar_from_thermal(ThermalParams(self.beta, self.omega))
        return SystemModel(L=L, H=H, nbar=nbar)

    def rho0_matrix(self, dim: int = 2) -> np.ndarray:
        if self.rho0 == "excited":
            rho = excited_projector()
        elif self.rho0 == "ground":
            rho = ground_projector()
        elif self.rho0 == "plus":
            rho = plus_state()
        else:
            rho = np.eye(dim, dtype=np.complex128) / dim
        if rho.shape[0] != dim:
            raise ConfigError(
                f"rho0 preset {self.rho0!r} is 2-dimensional but the model "
                f"has dim {dim}")
        return rho

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _matrix_from_json(text: str, name: str) -> np.ndarray:
    """Decode a matrix given as a JSON array of rows of [re, im] pairs."""
    try:
        rows = json.loads(text)
        mat = np.array([[complex(re, im) for re, im in row] for row in rows])
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"could not decode {name}: {exc}") from exc
    return mat


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_config_text(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, val, lineno)
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _coerce(key: str, val: str, lineno: int):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "bool":
            return _parse_bool(val)
        if ftype == "int":
            return int(val)
        if ftype == "float":
            return float(val)
        if ftype == "float | None":
            return None if val == "" else float(val)
        if ftype == "str | None":
            return None if val == "" else val
        return val
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc


def parse_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


@dataclass
class RunManifest:
    """Provenance of one CLI run; wall-clock is the only non-reproducible field."""

    config_hash: str
    code_version: str
    seed: int
    wall_clock_seconds: float
    criteria: dict

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "seed": self.seed,
            "wall_clock_seconds": self.wall_clock_seconds,
            "criteria": self.criteria,
        }
