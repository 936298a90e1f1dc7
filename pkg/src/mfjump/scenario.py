"""Scenario files: a strict JSON schema mapping onto the built-in presets.

Unknown fields are errors, not warnings; every message carries the JSON path
of the offending entry so runs stay reproducible from the file alone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .coeffs import DriftSpec, ExponentialMeasure, LinearInTime, PointMassMeasure
from .noise import TimeGrid
from .paths import StaircasePath
from .presets import preset_example21, thinning_system
from .approx import dyadic_partition

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Schema violation, with the JSON path of the offending field."""


def _require(obj: dict, path: str, known: dict, required: tuple):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    for key in obj:
        if key not in known:
            raise ScenarioError(f"{path}.{key}: unknown field")
    for key in required:
        if key not in obj:
            raise ScenarioError(f"{path}.{key}: required field missing")
    out = {}
    for key, checker in known.items():
        if key in obj:
            out[key] = checker(obj[key], f"{path}.{key}")
    return out


def _number(lo=None, hi=None, integer=False):
    def check(value, path):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{path}: expected a number")
        if integer and int(value) != value:
            raise ScenarioError(f"{path}: expected an integer")
        if lo is not None and value < lo:
            raise ScenarioError(f"{path}: must be >= {lo}")
        if hi is not None and value > hi:
            raise ScenarioError(f"{path}: must be <= {hi}")
        return int(value) if integer else float(value)
    return check


def _number_or_list(lo=None):
    scalar = _number(lo=lo)
    def check(value, path):
        if isinstance(value, list):
            return [scalar(v, f"{path}[{i}]") for i, v in enumerate(value)]
        return scalar(value, path)
    return check


def _string(value, path):
    if not isinstance(value, str):
        raise ScenarioError(f"{path}: expected a string")
    return value


def _passthrough(value, path):
    return value


@dataclass
class Scenario:
    name: str
    horizon: float
    grid_steps: int
    system: object
    drift_info: dict
    seed: int = None
    x_m: float = 1.0
    raw: dict = field(default_factory=dict)

    def grid(self, steps: int = None) -> TimeGrid:
        """Simulation grid; dyadic construction when the step count is a power
        of two (so approximation partitions are exact subsets)."""
        steps = self.grid_steps if steps is None else steps
        if steps >= 1 and steps & (steps - 1) == 0:
            return dyadic_partition(steps.bit_length(), self.horizon)
        return TimeGrid.uniform(self.horizon, steps)

    @property
    def deterministic_drift(self) -> bool:
        return all(d.deterministic for d in self.system.drifts)


def _build_drift(info: dict, path: str, n: int, horizon: float):
    kind = info.get("kind")
    if kind == "mean-field-average":
        _require(info, path, {"kind": _string}, ("kind",))
        return DriftSpec.mean_field_average(n)
    if kind == "constant":
        got = _require(info, path, {"kind": _string, "value": _number(lo=0)},
                       ("kind", "value"))
        return DriftSpec.constant(got["value"])
    if kind == "linear":
        got = _require(info, path, {"kind": _string, "intercept": _number(lo=0),
                                    "slope": _number()}, ("kind", "intercept", "slope"))
        bound = got["intercept"] + max(0.0, got["slope"] * horizon)
        if got["intercept"] + min(0.0, got["slope"] * horizon) < 0:
            raise ScenarioError(f"{path}: drift goes negative on [0, horizon]")
        return DriftSpec.time_function(LinearInTime(got["intercept"], got["slope"]),
                                       growth_bound=bound, label="linear")
    if kind == "staircase":
        got = _require(info, path, {"kind": _string, "breakpoints": _passthrough,
                                    "levels": _passthrough}, ("kind", "breakpoints", "levels"))
        try:
            stair = StaircasePath(np.asarray(got["breakpoints"], dtype=float),
                                  np.asarray(got["levels"], dtype=float))
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        if stair.horizon != horizon:
            raise ScenarioError(f"{path}.breakpoints: must end at the horizon")
        return DriftSpec.external(stair, growth_bound=float(stair.levels.max()))
    raise ScenarioError(f"{path}.kind: unknown drift kind {kind!r}")


def _build_levy(info: dict, path: str):
    kind = info.get("kind")
    if kind == "point":
        got = _require(info, path, {"kind": _string, "atoms": _passthrough},
                       ("kind", "atoms"))
        atoms = got["atoms"]
        if (not isinstance(atoms, list) or not atoms
                or not all(isinstance(a, list) and len(a) == 2 for a in atoms)):
            raise ScenarioError(f"{path}.atoms: expected [[size, mass], ...]")
        return PointMassMeasure(atoms=tuple((float(z), float(m)) for z, m in atoms))
    if kind == "exponential":
        got = _require(info, path, {"kind": _string, "mass": _number(lo=0),
                                    "mean": _number(lo=0)}, ("kind", "mass", "mean"))
        return ExponentialMeasure(mass=got["mass"], mean=got["mean"])
    raise ScenarioError(f"{path}.kind: unknown levy kind {kind!r}")


def _build_system(preset: dict, drift_info, horizon: float, path: str = "preset"):
    kind = preset.get("kind")
    if kind == "example21":
        got = _require(preset, path, {
            "kind": _string,
            "n_components": _number(lo=1, integer=True),
            "a": _number_or_list(lo=0),
            "sigma": _number_or_list(lo=0),
            "sigma0": _number(lo=0),
            "sigma_z": _number_or_list(lo=0),
            "sigma_z0": _number(lo=0),
            "alpha": _number_or_list(),
            "alpha0": _number(),
            "initial": _number_or_list(lo=0),
            "sigma_power": _number(lo=0),
        }, ("kind", "n_components", "a", "sigma", "initial"))
        n = got["n_components"]
        drift = None
        if drift_info is not None:
            drift = _build_drift(drift_info, "drift", n, horizon)
        try:
            return preset_example21(
                n, a=got["a"], sigma=got["sigma"], sigma0=got.get("sigma0", 0.0),
                sigma_z=got.get("sigma_z", 0.0), sigma_z0=got.get("sigma_z0", 0.0),
                alpha=got.get("alpha", 1.8), alpha0=got.get("alpha0", 1.5),
                initial=got["initial"], drift=drift,
                sigma_power=got.get("sigma_power", 0.5))
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    if kind == "cbi-thinning":
        got = _require(preset, path, {
            "kind": _string,
            "a": _number(lo=0),
            "sigma": _number(lo=0),
            "initial": _number(lo=0),
            "v_max": _number(lo=0),
            "levy": _passthrough,
        }, ("kind", "a", "initial", "v_max", "levy"))
        levy = _build_levy(got["levy"], f"{path}.levy")
        drift = None
        if drift_info is not None:
            drift = _build_drift(drift_info, "drift", 1, horizon)
        try:
            return thinning_system(levy, v_max=got["v_max"], a=got["a"],
                                   sigma=got.get("sigma", 0.0),
                                   initial=got["initial"], drift=drift)
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    raise ScenarioError(f"{path}.kind: unknown preset kind {kind!r}")


def parse_scenario(data: dict) -> Scenario:
    got = _require(data, "$", {
        "schema_version": _number(integer=True),
        "name": _string,
        "horizon": _number(lo=0),
        "grid_steps": _number(lo=1, integer=True),
        "preset": _passthrough,
        "drift": _passthrough,
        "seed": _number(lo=0, integer=True),
        "x_m": _number(lo=0),
    }, ("schema_version", "horizon", "grid_steps", "preset"))
    if got["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError(f"$.schema_version: expected {SCHEMA_VERSION}")
    if got["horizon"] <= 0:
        raise ScenarioError("$.horizon: must be positive")
    drift_info = got.get("drift")
    system = _build_system(got["preset"], drift_info, got["horizon"])
    return Scenario(
        name=got.get("name", "scenario"),
        horizon=got["horizon"],
        grid_steps=got["grid_steps"],
        system=system,
        drift_info=drift_info or {"kind": "mean-field-average"},
        seed=got.get("seed"),
        x_m=got.get("x_m", 1.0),
        raw=data)


def load_scenario(filename) -> Scenario:
    try:
        with open(filename, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(data)
