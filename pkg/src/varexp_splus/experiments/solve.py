"""Runners for ``solve`` and ``converge``."""

from __future__ import annotations

import logging

import numpy as np

from .. import closed_forms
from ..config import ExperimentConfig
from ..galerkin import CONVERGENCE_FIELDS, MIN_LEVELS, GalerkinProblem, convergence_study, solve_hierarchy
from .base import ExperimentResult, ExperimentRunner, ExperimentStatus, ExperimentTable

logger = logging.getLogger(__name__)

SOLUTION_FIELDS = ("z", "u")
LEVEL_FIELDS = ("level", "elements", "iterations", "residual_norm", "halvings", "predictor_used")


def build_problem(runner: ExperimentRunner, config: ExperimentConfig) -> GalerkinProblem:
    domain, p = runner.domain(config), runner.exponent(config)
    exact = (
        closed_forms.function(config.exact.name, config.exact.parameters)
        if config.exact is not None
        else None
    )
    return GalerkinProblem(
        domain=domain,
        exponent=p,
        kernel=runner.kernel(config, p),
        rhs=closed_forms.right_hand_side(config.rhs.name, config.rhs.parameters),
        levels=max(config.mesh.levels, MIN_LEVELS),
        solver=config.tolerances.solver_settings(),
        quadrature_nodes=config.mesh.quadrature,
        exact=exact,
        reference_level=config.mesh.reference_level,
        pairing_tolerance=config.tolerances.pairing,
    )


class SolveRunner(ExperimentRunner):
    """Solves levels 0..L with warm starts and exports the finest solution."""

    def handles(self, command: str) -> bool:
        return command == "solve"

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        problem = build_problem(self, config)
        solved = solve_hierarchy(problem, config.mesh.levels)
        solution, stats = solved[-1]

        levels = [
            {
                "level": u.mesh.level,
                "elements": u.mesh.n_elements,
                "iterations": s.iterations,
                "residual_norm": s.residual_norm,
                "halvings": s.halvings,
                "predictor_used": s.predictor_used,
            }
            for u, s in solved
        ]
        summary = {
            "kernel": problem.kernel.label,
            "exponent": problem.exponent.describe(),
            "level": solution.mesh.level,
            "iterations": stats.iterations,
            "residual_norm": stats.residual_norm,
            "predictor_used": stats.predictor_used,
        }
        if problem.exact is not None:
            nodal = float(np.max(np.abs(solution.coefficients - problem.exact(solution.mesh.nodes))))
            summary["max_nodal_error"] = nodal
            logger.info(f"max nodal error against {problem.exact.name}: {nodal:.3e}")

        return ExperimentResult(
            command="solve",
            summary=summary,
            tables=[
                ExperimentTable("solution", SOLUTION_FIELDS, solution.to_rows()),
                ExperimentTable("levels", LEVEL_FIELDS, levels),
            ],
        )


class ConvergeRunner(ExperimentRunner):
    """Convergence study; fails when errors do not decrease or the pairing persists."""

    def handles(self, command: str) -> bool:
        return command == "converge"

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        report = convergence_study(build_problem(self, config))
        return ExperimentResult(
            command="converge",
            status=ExperimentStatus.PASSED if report.passed else ExperimentStatus.FAILED,
            summary=report.summary(),
            tables=[ExperimentTable("convergence", CONVERGENCE_FIELDS, report.to_rows())],
            message=None if report.passed else "strong convergence not observed",
        )
