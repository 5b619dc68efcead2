"""Experiment config file save/load module: INI sections [dataset] [loss] [hyper] [solver] [attack] [output]."""

import configparser
import io
import os
from dataclasses import dataclass

import numpy as np

from attacks import AttackSpec
from core_model import HyperParams
from datasets import DatasetSpec
from errors import ConfigError
from settings import (
    DEFAULT_ATTACK_STEP_FRACTION, DEFAULT_ATTACK_STEPS, DEFAULT_BETA0, DEFAULT_EPSILON,
    DEFAULT_F_GAP, DEFAULT_LAMBDA, DEFAULT_PARTICLES, DEFAULT_RADIUS_FRACTIONS, SWEEP_EPSILONS,
    WDRO_ASCENT_RATE, WDRO_INNER_STEPS,
)

SOLVERS = ("erm", "wdro", "sdro_double", "sdro_single")
OUTPUT_CHOICES = ("last", "uniform")

# A tuple type marks a comma-separated list of floats.
FLOATS = tuple

# Required keys per section and their expected types
_REQUIRED_FIELDS = {
    "dataset": {"kind": str, "d": int},
    "loss": {"kind": str},
    "hyper": {"lam": float, "epsilon": float},
    "solver": {"name": str},
}

# Optional keys with default values (the type is taken from the default)
_OPTIONAL_DEFAULTS = {
    "dataset": {
        "n_per_class": 100, "separation": 4.0, "noise": 0.5, "seed": 0,
        "test_per_class": 0, "points": (),
    },
    "loss": {
        "c": 0.0, "hidden_width": 8, "init_seed": 0, "data_radius": 0.0, "theta_radius": 1.0,
    },
    "hyper": {"lsi_alpha": 0.0},
    "solver": {
        "seed": 0, "output": "last", "steps": 2000, "eta": 0.1,
        "T_out": 2000, "delta": 0.1, "varrho": 0.0, "inner_tau": 0.0, "inner_steps": 0,
        "F_gap": DEFAULT_F_GAP, "tau": 0.05, "eta_upper": 0.4, "beta0": DEFAULT_BETA0, "batch": 1,
        "M": DEFAULT_PARTICLES, "T": 2000,
        "wdro_inner_steps": WDRO_INNER_STEPS, "wdro_ascent_rate": WDRO_ASCENT_RATE,
        "sweep_epsilons": SWEEP_EPSILONS,
    },
    "attack": {
        "radius_fractions": DEFAULT_RADIUS_FRACTIONS, "steps": DEFAULT_ATTACK_STEPS,
        "step_fraction": DEFAULT_ATTACK_STEP_FRACTION,
    },
    "output": {"dir": "out", "log_theta": True},
}

SECTIONS = tuple(_OPTIONAL_DEFAULTS)


def _field_type(section, key):
    if key in _REQUIRED_FIELDS.get(section, {}):
        return _REQUIRED_FIELDS[section][key]
    return type(_OPTIONAL_DEFAULTS[section][key])


def default_config_data():
    """Return a complete config for Sinkhorn-DRO logistic regression on Gaussian blobs."""
    data = {section: dict(values) for section, values in _OPTIONAL_DEFAULTS.items()}
    data["dataset"].update(kind="gauss_blobs", d=2)
    data["loss"]["kind"] = "logistic"
    data["hyper"].update(lam=DEFAULT_LAMBDA, epsilon=DEFAULT_EPSILON)
    data["solver"]["name"] = "sdro_single"
    return data


# ---------------------------------------------------------------------------
# Text <-> typed values
# ---------------------------------------------------------------------------

def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _parse_value(section, key, text):
    kind = _field_type(section, key)
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(text)
            return lowered in ("true", "yes", "1", "on")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is FLOATS:
            return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot read '{text}' as {kind.__name__}") from exc
    return text


def serialize_config(data) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in SECTIONS:
        if section in data:
            parser[section] = {key: _format_value(value) for key, value in data[section].items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse_config(text):
    """Parse INI text into typed config data. Validates required fields and fills defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    data = {}
    for section in parser.sections():
        if section not in _OPTIONAL_DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        data[section] = {}
        for key, text_value in parser[section].items():
            if key not in _OPTIONAL_DEFAULTS[section] and key not in _REQUIRED_FIELDS.get(section, {}):
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            data[section][key] = _parse_value(section, key, text_value)
    fill_defaults(data)
    validate_config(data)
    return data


def fill_defaults(data):
    for section, defaults in _OPTIONAL_DEFAULTS.items():
        values = data.setdefault(section, {})
        for key, default in defaults.items():
            values.setdefault(key, default)
    return data


def save_config(filepath, data):
    """Save config data as INI. Creates parent directories if needed."""
    dirpath = os.path.dirname(filepath)
    if dirpath:
        os.makedirs(dirpath, exist_ok=True)
    with open(filepath, "w") as f:
        f.write(serialize_config(data))


def load_config(filepath):
    with open(filepath, "r") as f:
        return parse_config(f.read())


def validate_config(data):
    """Validate config data structure and contents.

    Raises ConfigError naming the offending key on invalid data.
    """
    if not isinstance(data, dict):
        raise ConfigError("config data must be a dict")

    for section, fields in _REQUIRED_FIELDS.items():
        if section not in data:
            raise ConfigError(f"missing required section [{section}]")
        for key, expected in fields.items():
            if key not in data[section]:
                raise ConfigError(f"[{section}] missing required key '{key}'")
            value = data[section][key]
            if expected is float and isinstance(value, int) and not isinstance(value, bool):
                data[section][key] = value = float(value)
            if not isinstance(value, expected):
                raise ConfigError(f"[{section}] {key} must be {expected.__name__}, got {type(value).__name__}")

    solver = data["solver"]
    if solver["name"] not in SOLVERS:
        raise ConfigError(f"[solver] name must be one of {', '.join(SOLVERS)}, got '{solver['name']}'")
    if solver.get("output", "last") not in OUTPUT_CHOICES:
        raise ConfigError(f"[solver] output must be 'last' or 'uniform', got '{solver['output']}'")
    if solver.get("batch", 1) < 1:
        raise ConfigError(f"[solver] batch must be >= 1, got {solver['batch']}")

    # Building the typed specs checks every remaining range constraint.
    experiment_from_data(data)


# ---------------------------------------------------------------------------
# Typed view
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    loss_kind: str
    loss_params: dict
    hp: HyperParams
    lsi_alpha: float | None
    solver: str
    solver_params: dict
    attack: AttackSpec
    out_dir: str
    log_theta: bool


def experiment_from_data(data) -> ExperimentConfig:
    data = fill_defaults({section: dict(values) for section, values in data.items()})
    ds = data["dataset"]
    dataset = DatasetSpec(
        kind=ds["kind"], n_per_class=int(ds["n_per_class"]), d=int(ds["d"]),
        separation=float(ds["separation"]), noise=float(ds["noise"]), seed=int(ds["seed"]),
        test_per_class=int(ds["test_per_class"]) or None, points=tuple(ds["points"]),
    )
    loss = dict(data["loss"])
    kind = loss.pop("kind")
    loss_params = {"hidden_width": int(loss["hidden_width"]), "init_seed": int(loss["init_seed"]),
                   "theta_radius": float(loss["theta_radius"])}
    if kind == "quadratic":
        loss_params["c"] = float(loss["c"])
    if float(loss["data_radius"]) > 0:
        loss_params["data_radius"] = float(loss["data_radius"])
    hp = HyperParams(float(data["hyper"]["lam"]), float(data["hyper"]["epsilon"]))
    alpha = float(data["hyper"]["lsi_alpha"])
    if alpha < 0:
        raise ConfigError(f"[hyper] lsi_alpha must be >= 0, got {alpha}")
    solver = dict(data["solver"])
    name = solver.pop("name")
    if any(e <= 0 for e in solver["sweep_epsilons"]):
        raise ConfigError("[solver] sweep_epsilons must all be > 0")
    at = data["attack"]
    attack = AttackSpec(radius_fractions=tuple(at["radius_fractions"]), steps=int(at["steps"]),
                        step_fraction=float(at["step_fraction"]))
    return ExperimentConfig(
        dataset=dataset, loss_kind=kind, loss_params=loss_params, hp=hp,
        lsi_alpha=alpha or None, solver=name, solver_params=solver, attack=attack,
        out_dir=str(data["output"]["dir"]), log_theta=bool(data["output"]["log_theta"]),
    )


def override(data, section, key, value):
    """Return a copy of *data* with one key replaced (used for --seed and --out-dir)."""
    out = {s: dict(v) for s, v in data.items()}
    out.setdefault(section, {})[key] = value
    return out


def theta_from_text(text, dim):
    """Parse a comma-separated theta; an empty string gives zeros."""
    if not text:
        return np.zeros(dim)
    try:
        values = np.array([float(part) for part in text.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"cannot read theta '{text}'") from exc
    if values.shape[0] != dim:
        raise ConfigError(f"theta has {values.shape[0]} entries, the loss needs {dim}")
    return values
