"""Experiment runners, one per CLI command.

Runners:
- NormRunner: modulars and Luxemburg norms of closed-form functions
- CheckKernelRunner: sampled A1/A2/A3 checks
- SolveRunner: Galerkin solve with nodal export
- ConvergeRunner: per-level convergence study
- SPlusProbeRunner: S+ probe and uniform-integrability profile
"""

from .base import (
    ExperimentResult,
    ExperimentRunner,
    ExperimentStatus,
    ExperimentTable,
    write_artifacts,
)
from .check_kernel import CheckKernelRunner
from .norm import NormRunner
from .router import ExperimentRouter
from .solve import ConvergeRunner, SolveRunner
from .splus_probe import SPlusProbeRunner

__all__ = [
    "ExperimentResult",
    "ExperimentRunner",
    "ExperimentStatus",
    "ExperimentTable",
    "write_artifacts",
    "NormRunner",
    "CheckKernelRunner",
    "SolveRunner",
    "ConvergeRunner",
    "SPlusProbeRunner",
    "ExperimentRouter",
]
