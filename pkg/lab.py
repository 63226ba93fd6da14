"""
GyroLab - Guiding-Centre Simulation Lab

Command-line front end: builds the subcommand parser from the loaded command
plugins, resolves configuration and dispatches to the handlers.
"""

import argparse
import importlib
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from src import __description__, __version__
from src.commands.utils import FLAG_SPECS, Command, CommandContext, Plugin
from src.config import resolve_config, to_toml
from src.errors import ConfigError

logger = logging.getLogger("gyrolab")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", out_dir: Optional[Path] = None) -> None:
    """Configure the gyrolab logger: stderr always, <out>/gyrolab.log when an output directory exists."""
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    formatter = logging.Formatter(LOG_FORMAT)
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if out_dir is not None:
        handlers.append(logging.FileHandler(out_dir / "gyrolab.log"))
    for handler in handlers:
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    logger.propagate = False


class GyroLab:
    """Main application class for GyroLab."""

    extensions = (
        "src.commands.simulate",   # simulate, gc
        "src.commands.compare",    # compare
        "src.commands.sweep",      # sweep
        "src.commands.verify",     # verify-field, verify-identities
        "src.commands.presets",    # mirror-bounce, pressure-drift
    )

    def __init__(self):
        self.commands: Dict[str, Command] = {}
        self.load_extensions()

    def add_plugin(self, plugin: Plugin) -> None:
        for command in plugin.commands:
            if command.name in self.commands:
                raise ValueError(f"command '{command.name}' registered twice")
            self.commands[command.name] = command
        logger.debug(f"Loaded plugin {plugin.name}: {[c.name for c in plugin.commands]}")

    def load_extensions(self) -> None:
        """Import every command module and let it register its plugin."""
        for extension in self.extensions:
            importlib.import_module(extension).load(self)

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog="gyrolab", description=__description__)
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)

        for command in self.commands.values():
            sub = subparsers.add_parser(command.name, help=command.description, description=command.description)
            sub.add_argument("--config", help="TOML or JSON config file (a manifest.json also works)")
            sub.add_argument("--out", default="out", help="output directory (default: out)")
            sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                             help="override one config key; repeatable, e.g. --set params.L=2")
            sub.add_argument("--print-defaults", action="store_true",
                             help="print the resolved configuration as TOML and exit")
            sub.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
            for key in command.flags:
                spec = dict(FLAG_SPECS[key])
                names = spec.pop("flags")
                spec.setdefault("default", None)
                sub.add_argument(*names, dest=f"flag_{key}", **spec)
        return parser

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse argv, run one subcommand and return its exit code."""
        argv = list(sys.argv[1:] if argv is None else argv)
        parser = self.build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)

        command = self.commands[args.command]
        flags = {key: getattr(args, f"flag_{key}") for key in command.flags}
        setup_logging(args.log_level)
        try:
            config = resolve_config(command.name, args.config, args.overrides, flags)
        except ConfigError as e:
            logger.error(f"Configuration error: {e}")
            return e.exit_code

        if args.print_defaults:
            print(to_toml(config, command.name), end="")
            return 0

        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Cannot create output directory {out_dir}: {e}")
            return 2
        setup_logging(args.log_level, out_dir)

        logger.info(f"GyroLab {__version__}: {command.name} -> {out_dir}")
        ctx = CommandContext(command=command.name, config=config, out_dir=out_dir, argv=argv)
        try:
            code = command.handler(ctx)
            logger.info(f"{command.name} finished with exit code {code}")
        finally:
            # release gyrolab.log
            setup_logging(args.log_level)
        return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    return GyroLab().run(argv)


def main():
    """Main entry point."""
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        logger.info("Run stopped by user")
        sys.exit(130)


if __name__ == "__main__":
    main()
