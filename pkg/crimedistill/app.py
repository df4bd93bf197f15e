import argparse
import importlib
import logging
import os
from pathlib import Path
from typing import Callable, List, Optional

from .errors import CrimeDistillError

Handler = Callable[[argparse.Namespace], None]


class CrimeDistillApp:
    """Command-line application; each command group lives in an extension module with a `setup(app)` hook."""

    EXTENSIONS = (
        "crimedistill.commands.data",
        "crimedistill.commands.training",
        "crimedistill.commands.evaluation",
    )

    def __init__(self) -> None:
        self.parser = argparse.ArgumentParser(
            prog="crimedistill",
            description="Curriculum mutual distillation for fine-grained crime event prediction.",
        )
        self._subparsers = self.parser.add_subparsers(dest="command", required=True)
        self.runs_dir: Path = self._load_runs_dir()
        self.device: str = self._load_device()
        self.progress: bool = self._load_progress()
        self.extensions: List[str] = []
        self._log = logging.getLogger("crimedistill.app")

    @staticmethod
    def _load_runs_dir() -> Path:
        return Path(os.getenv("CRIMEDISTILL_RUNS_DIR", "runs"))

    @staticmethod
    def _load_device() -> str:
        return os.getenv("CRIMEDISTILL_DEVICE", "cpu")

    @staticmethod
    def _load_progress() -> bool:
        return os.getenv("CRIMEDISTILL_PROGRESS", "1").strip().lower() not in ("0", "false", "no", "off")

    def add_command(self, name: str, help: str, handler: Handler) -> argparse.ArgumentParser:
        command = self._subparsers.add_parser(name, help=help, description=help)
        command.set_defaults(handler=handler)
        return command

    def load_extension(self, name: str) -> None:
        module = importlib.import_module(name)
        module.setup(self)
        self.extensions.append(name)

    def setup(self) -> "CrimeDistillApp":
        for name in self.EXTENSIONS:
            self.load_extension(name)
        return self

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Dispatch one command; returns the process exit code."""
        if not self.extensions:
            self.setup()
        args = self.parser.parse_args(argv)
        try:
            args.handler(args)
        except CrimeDistillError as exc:
            self._log.error("%s failed: %s", args.command, exc)
            return exc.exit_code
        except KeyboardInterrupt:
            self._log.info("Interrupted.")
            return 130
        except Exception:
            self._log.exception("%s failed unexpectedly", args.command)
            return 1
        return 0
