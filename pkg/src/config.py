"""
Configuration for GyroLab

Per-subcommand defaults, structured-text config files (TOML or JSON, including
a previous run's manifest.json), `--set key=value` overrides and validation.
Nothing is read from the environment.
"""

import json
import logging
from copy import deepcopy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .field_models import MODEL_NAMES, MODEL_REGISTRY

logger = logging.getLogger("gyrolab.config")

AUTO = "auto"


# --- Value checkers ----------------------------------------------------------

def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _positive(key: str, value: Any) -> float:
    value = _number(key, value)
    if not value > 0.0:
        raise ConfigError(f"'{key}' must be positive, got {value}")
    return value


def _positive_or_auto(key: str, value: Any):
    return AUTO if value == AUTO else _positive(key, value)


def _count(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"'{key}' must be a positive integer, got {value!r}")
    return value


def _seed(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"'{key}' must be a non-negative integer, got {value!r}")
    return value


def _flag(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"'{key}' must be true or false, got {value!r}")
    return value


def _vec3(key: str, value: Any) -> List[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"'{key}' must be a list of 3 numbers, got {value!r}")
    return [_number(key, c) for c in value]


def _vec3_or_auto(key: str, value: Any):
    return AUTO if value == AUTO else _vec3(key, value)


def _omegas(key: str, value: Any) -> List[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"'{key}' must be a non-empty list of numbers, got {value!r}")
    return [_positive(key, w) for w in value]


def _choice(*choices) -> Callable[[str, Any], Any]:
    def check(key: str, value: Any):
        if value not in choices:
            raise ConfigError(f"'{key}' must be one of {', '.join(map(str, choices))}; got {value!r}")
        return value
    return check


def _params(key: str, value: Any) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be a table of model parameters, got {value!r}")
    return dict(value)


@dataclass(frozen=True)
class Option:
    default: Any
    check: Callable[[str, Any], Any]
    help: str = ""


MODEL = Option("uniform", _choice(*MODEL_NAMES), "field model name")
MODEL_OR_ALL = Option("all", _choice("all", *MODEL_NAMES), "field model name or 'all'")
PARAMS = Option({}, _params, "model parameter table")
SCHEMES = ("boris", "rk4")
METRICS = ("zeroth_order", "first_order_gc", "moment_drift", "avg_gyro", "pressure_remainder")

_ORBIT_OPTIONS = {
    "model": MODEL,
    "params": PARAMS,
    "omega": Option(100.0, _positive, "gyrofrequency scale"),
    "T": Option(1.0, _positive, "final time"),
    "steps_per_gyro": Option(64, _count, "integrator steps per local gyroperiod"),
    "scheme": Option("boris", _choice(*SCHEMES), "full-orbit scheme"),
    "dt_out": Option(AUTO, _positive_or_auto, "output spacing (auto: gyroperiod at x0 / 8)"),
    "x0": Option([0.0, 0.0, 0.0], _vec3, "initial position"),
    "v0": Option([1.0, 0.0, 1.0], _vec3, "initial velocity"),
}

_GC_OPTIONS = {
    "order": Option(1, _choice(0, 1), "guiding-centre order"),
    "init_mode": Option("exact", _choice("exact", "naive"), "guiding-centre initialisation"),
    "dt": Option(AUTO, _positive_or_auto, "guiding-centre step (auto: T / 10^4)"),
}

_SWEEP_OPTIONS = {
    "model": Option("slab_gradB", _choice(*MODEL_NAMES), "field model name"),
    "params": PARAMS,
    "metric": Option("first_order_gc", _choice(*METRICS), "error metric"),
    "omegas": Option([1e2, 3e2, 1e3, 3e3, 1e4], _omegas, "gyrofrequency scales"),
    "T": Option(AUTO, _positive_or_auto, "window (auto: one bounce for mirror, else 5)"),
    "x0": Option(AUTO, _vec3_or_auto, "initial position (auto: well-prepared default)"),
    "v0": Option(AUTO, _vec3_or_auto, "initial velocity (auto: well-prepared default)"),
    "steps_per_gyro": Option(400, _count, "reference-orbit steps per gyroperiod"),
    "scheme": Option("boris", _choice(*SCHEMES), "reference-orbit scheme"),
    "grid_points": Option(2000, _count, "comparison grid intervals"),
    "gc_steps": Option(10_000, _count, "guiding-centre steps over T"),
    "init_mode": Option("exact", _choice("exact", "naive"), "guiding-centre initialisation"),
    "workers": Option(1, _count, "parallel sweep cells"),
}

DEFAULTS: Dict[str, Dict[str, Option]] = {
    "simulate": dict(_ORBIT_OPTIONS),
    "gc": {
        **{key: _ORBIT_OPTIONS[key] for key in ("model", "params", "omega", "T", "x0", "v0")},
        "dt_out": Option(AUTO, _positive_or_auto, "output spacing (auto: T / 2000)"),
        **_GC_OPTIONS,
    },
    "compare": {
        **_ORBIT_OPTIONS,
        "steps_per_gyro": Option(200, _count, "integrator steps per local gyroperiod"),
        "scheme": Option("rk4", _choice(*SCHEMES), "full-orbit scheme"),
        **_GC_OPTIONS,
    },
    "sweep": _SWEEP_OPTIONS,
    "verify-field": {
        "model": MODEL_OR_ALL,
        "params": PARAMS,
        "n": Option(1000, _count, "sample points"),
        "seed": Option(42, _seed, "sampling seed"),
        "fd_step": Option(1e-5, _positive, "finite-difference step"),
    },
    "verify-identities": {
        "model": MODEL_OR_ALL,
        "params": PARAMS,
        "n": Option(1000, _count, "sample points"),
        "seed": Option(42, _seed, "sampling seed"),
        "fd": Option(False, _flag, "use finite-difference Jacobians"),
        "fd_step": Option(1e-5, _positive, "finite-difference step"),
    },
    "mirror-bounce": {
        "params": PARAMS,
        "omegas": Option([1e3, 2e3], _omegas, "gyrofrequency scales"),
        "x0": Option([0.0, 0.0, 0.0], _vec3, "initial position"),
        "v0": Option([0.8, 0.0, 0.6], _vec3, "initial velocity"),
        "bounces": Option(1.0, _positive, "window length in bounce periods"),
        "steps_per_gyro": Option(400, _count, "reference-orbit steps per gyroperiod"),
        "scheme": Option("boris", _choice(*SCHEMES), "reference-orbit scheme"),
        "grid_points": Option(2000, _count, "output grid intervals"),
        "gc_steps": Option(10_000, _count, "guiding-centre steps over the window"),
        "workers": Option(1, _count, "parallel runs"),
    },
    "pressure-drift": {
        "model": Option("solovev", _choice("screw_pinch", "solovev", "uniform"), "equilibrium model"),
        "params": PARAMS,
        "omegas": Option([1e3, 3e3, 1e4], _omegas, "gyrofrequency scales"),
        "T": Option(5.0, _positive, "window"),
        "x0": Option(AUTO, _vec3_or_auto, "initial position (auto: well-prepared default)"),
        "v0": Option(AUTO, _vec3_or_auto, "initial velocity (auto: well-prepared default)"),
        "steps_per_gyro": Option(400, _count, "reference-orbit steps per gyroperiod"),
        "scheme": Option("boris", _choice(*SCHEMES), "reference-orbit scheme"),
        "grid_points": Option(2000, _count, "comparison grid intervals"),
        "gc_steps": Option(10_000, _count, "guiding-centre steps over T"),
        "workers": Option(1, _count, "parallel sweep cells"),
    },
}
COMMANDS = tuple(DEFAULTS)


def defaults_for(command: str) -> Dict[str, Any]:
    try:
        options = DEFAULTS[command]
    except KeyError:
        raise ConfigError(f"unknown subcommand '{command}'") from None
    return {key: deepcopy(opt.default) for key, opt in options.items()}


# --- Files and overrides -------------------------------------------------------

def load_config_file(path) -> Dict[str, Any]:
    """Read a TOML or JSON config; a manifest.json contributes its `config` block."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a table at top level")
    if "schema_version" in data and isinstance(data.get("config"), dict):
        logger.info(f"Re-using the resolved configuration of manifest {path}")
        data = data["config"]
    return data


def parse_override(text: str) -> Dict[str, Any]:
    """Turn `key=value` (value in TOML syntax, bare strings allowed) into a nested dict."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' must look like key=value")
    key, raw = (part.strip() for part in text.split("=", 1))
    if not key:
        raise ConfigError(f"override '{text}' has an empty key")
    try:
        value = tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw
    parts = key.split(".")
    if len(parts) == 2 and parts[0] == "params":
        return {"params": {parts[1]: value}}
    if len(parts) != 1:
        raise ConfigError(f"override key '{key}' must be a top-level key or params.<name>")
    return {key: value}


def _merge(base: Dict[str, Any], layer: Dict[str, Any]) -> None:
    for key, value in layer.items():
        if key == "params" and isinstance(value, dict) and isinstance(base.get("params"), dict):
            base["params"].update(value)
        else:
            base[key] = value


def validate(command: str, config: Dict[str, Any]) -> Dict[str, Any]:
    """Check every key and value; unknown keys are reported together."""
    options = DEFAULTS[command]
    unknown = sorted(set(config) - set(options))
    if unknown:
        raise ConfigError(f"unknown keys for '{command}': {', '.join(unknown)}")
    checked = {key: options[key].check(key, value) for key, value in config.items()}

    model = checked.get("model", "mirror" if command == "mirror-bounce" else None)
    params = checked.get("params", {})
    if model in MODEL_REGISTRY:
        allowed = MODEL_REGISTRY[model].PARAMETERS
        bad = sorted(set(params) - set(allowed))
        if bad:
            raise ConfigError(f"unknown parameters for model '{model}': {', '.join(bad)}")
    elif params:
        raise ConfigError("model parameters need a single named model, not 'all'")
    return checked


def resolve_config(command: str, config_path: Optional[str] = None, overrides: Sequence[str] = (),
                   flags: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """defaults < config file < --set overrides < dedicated flags, then validated."""
    config = defaults_for(command)
    if config_path:
        _merge(config, load_config_file(config_path))
    for text in overrides:
        _merge(config, parse_override(text))
    for key, value in (flags or {}).items():
        if value is not None:
            _merge(config, {key: value})
    resolved = validate(command, config)
    logger.debug(f"Resolved {command} config: {resolved}")
    return resolved


# --- TOML output ---------------------------------------------------------------

def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot express {value!r} in TOML")


def to_toml(config: Dict[str, Any], command: Optional[str] = None) -> str:
    """Render a flat config (plus its params table) as TOML."""
    lines = []
    options = DEFAULTS.get(command, {}) if command else {}
    for key, value in config.items():
        if key == "params":
            continue
        help_text = options[key].help if key in options else ""
        comment = f"  # {help_text}" if help_text else ""
        lines.append(f"{key} = {_toml_value(value)}{comment}")
    params = config.get("params")
    if params is not None:
        lines.append("")
        lines.append("[params]")
        for key, value in params.items():
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"
