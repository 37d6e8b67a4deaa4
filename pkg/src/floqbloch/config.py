"""Experiment configuration files (YAML or JSON) and their validation."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .hamiltonian import ModelParams, parse_fraction

TASKS = ("bands", "chern", "obc", "pump", "momentum")
FORMATS = ("csv", "json")

MODEL_DEFAULTS = {
    "J": 2.5,
    "V": 2.5,
    "T1": 2.0,
    "ratio": "0",
    "U": 0.0,
    "lam": "1/3",
    "beta": 0.0,
}
SYSTEM_DEFAULTS = {"N": 1, "L": None}
NUMERICS_DEFAULTS = {
    # propagation
    "slices_per_period": None,
    "scheme": "cf4",
    "check_convergence": False,
    "convergence_tol": 1e-9,
    "threads": None,
    # torus grids
    "grid": None,
    "phis": None,
    "refine": False,
    "groups": "auto",
    "gap_floor": 1e-6,
    "cut": None,
    # pumping
    "bands": [0],
    "initial": ["wannier"],
    "M": 2000,
    "sigma": 0.7,
    "R0": None,
    "expected_drift": 0.0,
    # open chain
    "L_open": 16,
    "n_beta": 96,
    # momentum movie
    "samples": 200,
    "zone": "cell",
    "width_cells": 20.0,
}
OUTPUT_DEFAULTS = {"dir": "out", "format": "csv"}


def _merge(section: str, given: Any, defaults: dict, errors: list) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        errors.append(f"{section}: expected a mapping, got {type(given).__name__}")
        return dict(defaults)
    unknown = sorted(set(given) - set(defaults))
    for key in unknown:
        errors.append(f"{section}.{key}: unknown field")
    out = dict(defaults)
    out.update({k: v for k, v in given.items() if k in defaults})
    return out


def _fraction_text(value) -> str:
    f = parse_fraction(value)
    return f"{f.numerator}/{f.denominator}"


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``echo()`` gives the canonical form."""

    task: str
    name: str
    model: dict
    system: dict
    numerics: dict
    output: dict
    params: ModelParams = field(repr=False, compare=False, default=None)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        errors: list[str] = []
        unknown = sorted(set(raw) - {"task", "name", "model", "system", "numerics", "output"})
        errors += [f"{k}: unknown field" for k in unknown]
        task = raw.get("task")
        if task not in TASKS:
            errors.append(f"task: must be one of {', '.join(TASKS)}, got {task!r}")
        model = _merge("model", raw.get("model"), MODEL_DEFAULTS, errors)
        system = _merge("system", raw.get("system"), SYSTEM_DEFAULTS, errors)
        numerics = _merge("numerics", copy.deepcopy(raw.get("numerics")), NUMERICS_DEFAULTS, errors)
        output = _merge("output", raw.get("output"), OUTPUT_DEFAULTS, errors)

        for key in ("ratio", "lam"):
            try:
                model[key] = _fraction_text(model[key])
            except ConfigError as exc:
                errors.append(f"model.{key}: {exc}")
        for key in ("J", "V", "T1", "U", "beta"):
            if not isinstance(model[key], (int, float)) or isinstance(model[key], bool):
                errors.append(f"model.{key}: must be a number")
            elif key in ("J", "T1") and model[key] <= 0:
                errors.append(f"model.{key}: must be positive")
            elif key == "U" and model[key] < 0:
                errors.append("model.U: must be non-negative")
        params = None
        if not any(e.startswith("model.") for e in errors):
            try:
                params = ModelParams(
                    J=float(model["J"]),
                    V=float(model["V"]),
                    T1=float(model["T1"]),
                    ratio=Fraction(model["ratio"]),
                    U=float(model["U"]),
                    lam=Fraction(model["lam"]),
                    beta=float(model["beta"]),
                )
            except (ConfigError, ValueError) as exc:
                errors.append(f"model: {exc}")

        _check_int(system, "system.N", "N", errors, minimum=1)
        if system["L"] is not None:
            _check_int(system, "system.L", "L", errors, minimum=1)
        _validate_numerics(numerics, errors)
        if output["format"] not in FORMATS:
            errors.append(f"output.format: must be one of {', '.join(FORMATS)}")
        if not isinstance(output["dir"], str):
            errors.append("output.dir: must be a path string")
        if task == "momentum" and system["N"] != 1:
            errors.append("system.N: the momentum task needs a single particle")
        if errors:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
        name = raw.get("name") or task
        return cls(task, str(name), model, system, numerics, output, params)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
        return cls.from_dict(raw)

    def echo(self) -> dict:
        return {
            "task": self.task,
            "name": self.name,
            "model": dict(self.model),
            "system": dict(self.system),
            "numerics": copy.deepcopy(self.numerics),
            "output": dict(self.output),
        }

    def digest(self) -> str:
        """sha256 of the canonical JSON echo (identifies the run's inputs)."""
        text = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **numerics) -> "ExperimentConfig":
        raw = self.echo()
        raw["numerics"].update({k: v for k, v in numerics.items() if v is not None})
        return ExperimentConfig.from_dict(raw)


def _check_int(section, label, key, errors, minimum=None):
    value = section[key]
    if not isinstance(value, int) or isinstance(value, bool):
        errors.append(f"{label}: must be an integer")
    elif minimum is not None and value < minimum:
        errors.append(f"{label}: must be >= {minimum}")


def _validate_numerics(num: dict, errors: list):
    if num["slices_per_period"] is not None:
        _check_int(num, "numerics.slices_per_period", "slices_per_period", errors, minimum=1)
    if num["scheme"] not in ("cf4", "midpoint"):
        errors.append("numerics.scheme: must be cf4 or midpoint")
    if num["threads"] is not None:
        _check_int(num, "numerics.threads", "threads", errors, minimum=1)
    if num["grid"] is not None:
        g = num["grid"]
        if not (isinstance(g, list) and len(g) == 2 and all(isinstance(x, int) and x >= 1 for x in g)):
            errors.append("numerics.grid: must be [n_beta, n_phi] with positive integers")
    if num["phis"] is not None:
        if not (isinstance(num["phis"], list) and all(isinstance(x, (int, float)) for x in num["phis"])):
            errors.append("numerics.phis: must be a list of numbers")
    groups = num["groups"]
    if groups != "auto" and not (
        isinstance(groups, list)
        and all(isinstance(g, list) and g and all(isinstance(b, int) for b in g) for g in groups)
    ):
        errors.append('numerics.groups: must be "auto" or a list of band-index lists')
    cut = num["cut"]
    if cut == "pi":
        num["cut"] = "pi"
    elif cut is not None and not isinstance(cut, (int, float)):
        errors.append('numerics.cut: must be null, a number, or "pi"')
    if not (isinstance(num["bands"], list) and num["bands"] and all(isinstance(b, int) for b in num["bands"])):
        errors.append("numerics.bands: must be a non-empty list of integers")
    if isinstance(num["initial"], str):
        num["initial"] = [num["initial"]]
    if not (isinstance(num["initial"], list) and set(num["initial"]) <= {"wannier", "gaussian"} and num["initial"]):
        errors.append("numerics.initial: must list wannier and/or gaussian")
    _check_int(num, "numerics.M", "M", errors, minimum=1)
    if not isinstance(num["sigma"], (int, float)) or num["sigma"] <= 0:
        errors.append("numerics.sigma: must be a positive number")
    if num["R0"] is not None:
        _check_int(num, "numerics.R0", "R0", errors, minimum=0)
    _check_int(num, "numerics.L_open", "L_open", errors, minimum=1)
    _check_int(num, "numerics.n_beta", "n_beta", errors, minimum=2)
    _check_int(num, "numerics.samples", "samples", errors, minimum=1)
    if num["zone"] not in ("cell", "site"):
        errors.append("numerics.zone: must be cell or site")
    for key in ("gap_floor", "convergence_tol", "width_cells"):
        if not isinstance(num[key], (int, float)) or num[key] <= 0:
            errors.append(f"numerics.{key}: must be a positive number")
    if not isinstance(num["expected_drift"], (int, float)):
        errors.append("numerics.expected_drift: must be a number")
