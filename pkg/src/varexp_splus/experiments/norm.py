"""Runner for ``norm``: modulars and Luxemburg norms of a closed-form function."""

from __future__ import annotations

import logging

from .. import closed_forms
from ..config import ExperimentConfig
from ..fem_mesh import Mesh, interpolate
from ..modular_space import (
    classical_norm,
    luxemburg_norm,
    modular,
    norm_modular_relations,
    sobolev_modular,
    sobolev_norm,
)
from .base import ExperimentResult, ExperimentRunner, ExperimentStatus, ExperimentTable

logger = logging.getLogger(__name__)

NORM_FIELDS = (
    "function",
    "level",
    "modular",
    "norm",
    "bisections",
    "sobolev_modular",
    "sobolev_norm",
    "classical_norm",
    "branch",
    "lower_slack",
    "upper_slack",
)


class NormRunner(ExperimentRunner):
    """Interpolates the configured function and measures it in L^{p(.)} and W^{1,p(.)}."""

    def handles(self, command: str) -> bool:
        return command == "norm"

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        domain, p, rule = self.domain(config), self.exponent(config), self.rule(config)
        source = closed_forms.function(config.function.name, config.function.parameters)
        mesh = Mesh.uniform(domain, config.mesh.levels)
        u = interpolate(source, mesh)

        norm = luxemburg_norm(u, p, rule)
        relations = norm_modular_relations(u, p, rule)
        row = {
            "function": source.name,
            "level": mesh.level,
            "modular": modular(u, p, rule).value,
            "norm": norm.value,
            "bisections": norm.iterations,
            "sobolev_modular": sobolev_modular(u, p, rule).value,
            "sobolev_norm": sobolev_norm(u, p, rule).value,
            "classical_norm": classical_norm(u, p.p_minus, rule) if p.is_constant else None,
            "branch": relations.branch,
            "lower_slack": relations.lower_slack,
            "upper_slack": relations.upper_slack,
        }
        logger.info(f"norm of {source.name}: {norm.value:.10g}")
        return ExperimentResult(
            command="norm",
            status=ExperimentStatus.PASSED if relations.holds else ExperimentStatus.FAILED,
            summary={"exponent": p.describe(), "norm": norm.value, "relations_hold": relations.holds},
            tables=[ExperimentTable("norm", NORM_FIELDS, [row])],
        )
