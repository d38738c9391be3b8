"""Base experiment runner interface and result types.

Each CLI command is served by one runner. Runners build the numerical
objects from an ``ExperimentConfig``, run them, and return tables plus a
summary; writing artifacts is shared here.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from ..config import ExperimentConfig
from ..exponent_field import Domain, ExponentField
from ..fem_mesh import QuadratureRule
from ..operator_kernel import CaratheodoryKernel, build_kernel
from ..reporting import write_csv, write_summary_json

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"


class ExperimentStatus(str, Enum):
    """Verdict of a finished experiment (runtime errors raise instead)."""

    PASSED = "passed"
    FAILED = "failed"


@dataclass
class ExperimentTable:
    """One CSV artifact: ``<name>.csv`` with the given column order."""

    name: str
    fieldnames: tuple[str, ...]
    rows: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class ExperimentResult:
    """Result of running one experiment."""

    command: str
    status: ExperimentStatus = ExperimentStatus.PASSED
    summary: dict[str, Any] = field(default_factory=dict)
    tables: list[ExperimentTable] = field(default_factory=list)
    message: str | None = None
    artifacts: list[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status is ExperimentStatus.PASSED

    def table(self, name: str) -> ExperimentTable:
        for table in self.tables:
            if table.name == name:
                return table
        raise KeyError(name)


class ExperimentRunner(ABC):
    """Base class for experiment runners.

    Runners are stateless; everything they need comes from the config.
    """

    @abstractmethod
    def handles(self, command: str) -> bool:
        """Check if this runner serves the given CLI command."""
        ...

    @abstractmethod
    def run(self, config: ExperimentConfig) -> ExperimentResult:
        """Run the experiment described by ``config``."""
        ...

    # -------------------------------------------------------------------------
    # Shared builders
    # -------------------------------------------------------------------------

    @staticmethod
    def domain(config: ExperimentConfig) -> Domain:
        return config.domain.build()

    @staticmethod
    def exponent(config: ExperimentConfig) -> ExponentField:
        return config.exponent.build(config.domain.build())

    @staticmethod
    def kernel(config: ExperimentConfig, p: ExponentField) -> CaratheodoryKernel:
        return build_kernel(config.kernel.label, p, config.kernel.parameters)

    @staticmethod
    def rule(config: ExperimentConfig) -> QuadratureRule:
        return QuadratureRule.gauss_legendre(config.mesh.quadrature)


def write_artifacts(result: ExperimentResult, output: Path) -> list[Path]:
    """Write every table as CSV plus ``summary.json`` under ``output``."""
    output.mkdir(parents=True, exist_ok=True)
    paths = [
        write_csv(output / f"{table.name}.csv", table.rows, table.fieldnames)
        for table in result.tables
    ]
    summary = {"command": result.command, "status": result.status.value, **result.summary}
    if result.message:
        summary["message"] = result.message
    paths.append(write_summary_json(output / SUMMARY_FILE, summary))
    result.artifacts = paths
    logger.info(f"wrote {len(paths)} artifacts to {output}")
    return paths
