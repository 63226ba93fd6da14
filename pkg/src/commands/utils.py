"""
Command Utilities for GyroLab

Plugin registration, the shared command context, uniform error handling and
the manifest-writing epilogue every subcommand goes through.
"""

import argparse
import functools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..config import AUTO
from ..errors import AcceptanceFailure, GyroLabError, exit_code_for
from ..field_models import FieldModel, build_model
from ..manifest import write_manifest

logger = logging.getLogger("gyrolab.commands.utils")


def _omega_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--omegas expects comma-separated numbers, got '{text}'") from None


# Dedicated flags; each maps onto the config key of the same name.
FLAG_SPECS: Dict[str, Dict[str, Any]] = {
    "model": {"flags": ["--model"], "help": "field model name"},
    "metric": {"flags": ["--metric"], "help": "sweep error metric"},
    "omegas": {"flags": ["--omegas"], "type": _omega_list, "help": "comma-separated gyrofrequency scales"},
    "T": {"flags": ["--T"], "type": float, "help": "final time / comparison window"},
    "n": {"flags": ["--n"], "type": int, "help": "number of sample points"},
    "seed": {"flags": ["--seed"], "type": int, "help": "sampling seed"},
    "fd": {"flags": ["--fd"], "action": "store_true", "default": None, "help": "use finite-difference Jacobians"},
    "workers": {"flags": ["--workers"], "type": int, "help": "parallel worker processes"},
}


@dataclass
class CommandContext:
    """Everything a subcommand handler needs for one run."""

    command: str
    config: Dict[str, Any]
    out_dir: Path
    argv: Sequence[str]
    outputs: List[Path] = field(default_factory=list)
    seeds: Dict[str, int] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)

    def output_path(self, name: str) -> Path:
        path = self.out_dir / name
        self.outputs.append(path)
        return path

    def model(self, name: Optional[str] = None) -> FieldModel:
        return build_model(name or self.config["model"], self.config.get("params", {}))


@dataclass(frozen=True)
class Command:
    name: str
    description: str
    handler: Callable[[CommandContext], int]
    flags: Sequence[str] = ()


class Plugin:
    """A named group of subcommands, loaded by the application like an extension."""

    def __init__(self, name: str):
        self.name = name
        self.commands: List[Command] = []

    def command(self, name: str, description: str, flags: Sequence[str] = ()):
        def decorator(func: Callable[[CommandContext], int]):
            self.commands.append(Command(name, description, safe_command(func), tuple(flags)))
            return func
        return decorator


def safe_command(func: Callable[[CommandContext], int]) -> Callable[[CommandContext], int]:
    """Run a handler, write the manifest on completion and map failures to exit codes."""
    @functools.wraps(func)
    def wrapper(ctx: CommandContext) -> int:
        try:
            code = func(ctx)
        except AcceptanceFailure as e:
            logger.error(f"{ctx.command}: acceptance check failed: {e}")
            ctx.results["failures"] = str(e)
            code = e.exit_code
        except Exception as e:
            if not isinstance(e, (GyroLabError, ValueError, OSError)):
                logger.exception(f"Unexpected error in {ctx.command}")
            logger.error(f"{ctx.command} failed: {e}")
            ctx.results["error"] = str(e)
            code = exit_code_for(e)
        ctx.results["exit_code"] = code
        outputs = [path for path in ctx.outputs if path.exists()]
        write_manifest(ctx.out_dir, ctx.command, ctx.argv, ctx.config, outputs, ctx.seeds, ctx.results)
        return code
    return wrapper


def require(condition: bool, message: str, failures: List[str]) -> None:
    """Record a failed acceptance assertion (checked together at the end of a run)."""
    if condition:
        logger.info(f"PASS {message}")
    else:
        logger.warning(f"FAIL {message}")
        failures.append(message)


def raise_failures(failures: List[str]) -> None:
    if failures:
        raise AcceptanceFailure("; ".join(failures))


def resolve_vec(value, fallback) -> np.ndarray:
    return np.asarray(fallback if value == AUTO else value, dtype=float)


def resolve_float(value, fallback) -> float:
    return float(fallback if value == AUTO else value)


def optional_float(value) -> Optional[float]:
    return None if value == AUTO else float(value)
