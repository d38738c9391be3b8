"""Experiment router that dispatches a configuration to its runner."""

from __future__ import annotations

import logging

from ..config import COMMANDS, ExperimentConfig
from ..errors import UnknownLabelError
from .base import ExperimentResult, ExperimentRunner
from .check_kernel import CheckKernelRunner
from .norm import NormRunner
from .solve import ConvergeRunner, SolveRunner
from .splus_probe import SPlusProbeRunner

logger = logging.getLogger(__name__)


class ExperimentRouter:
    """Routes an experiment config to the runner serving its command."""

    def __init__(self) -> None:
        self._norm = NormRunner()
        self._check_kernel = CheckKernelRunner()
        self._solve = SolveRunner()
        self._converge = ConvergeRunner()
        self._splus_probe = SPlusProbeRunner()

        self._runners: list[ExperimentRunner] = [
            self._norm,
            self._check_kernel,
            self._solve,
            self._converge,
            self._splus_probe,
        ]

    def runner_for(self, command: str) -> ExperimentRunner:
        """Runner for ``command``.

        Raises:
            UnknownLabelError: If no runner serves the command
        """
        for runner in self._runners:
            if runner.handles(command):
                return runner
        raise UnknownLabelError("command", command, list(COMMANDS))

    def route(self, config: ExperimentConfig) -> ExperimentResult:
        runner = self.runner_for(config.command)
        logger.info(f"running '{config.command}' with {type(runner).__name__} (seed {config.seed})")
        result = runner.run(config)
        logger.info(f"'{config.command}' finished: {result.status.value}")
        return result

    @property
    def commands(self) -> list[str]:
        return [command for command in COMMANDS if any(r.handles(command) for r in self._runners)]
